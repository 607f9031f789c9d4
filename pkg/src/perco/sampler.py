"""Seed-deterministic lazy edge configurations.

The state of an edge is a pure function of ``(seed, edge)``.  The edge is
serialised as::

    kind tag    1 byte   (0 short, 1 long)
    tail length 4 bytes  unsigned, little endian
    tail labels 1 byte per label, 1-based
    suffix      1 byte per label, 1-based
    seed        8 bytes  unsigned, little endian

and hashed with BLAKE2b (16-byte digest).  The top 53 bits of the digest,
read big endian, give a uniform ``U`` in [0, 1); a short edge is open iff
``U < p`` and a long edge iff ``U < q``.  Thresholding one uniform per edge
makes clusters monotone in ``(p, q)`` for a fixed seed.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .tree import Edge, Kind, ModelParams, Vertex, check_edge, words

_TWO_M53 = 2.0 ** -53
_U64 = 1 << 64
_blake2b = hashlib.blake2b


def _check_seed(seed: int) -> int:
    if not isinstance(seed, int) or not 0 <= seed < _U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed


def edge_bytes(edge: Edge, seed: int) -> bytes:
    return (
        bytes((int(edge.kind),))
        + struct.pack("<I", len(edge.tail))
        + bytes(edge.tail)
        + bytes(edge.suffix)
        + struct.pack("<Q", seed)
    )


def uniform_from_bytes(data: bytes) -> float:
    digest = _blake2b(data, digest_size=16).digest()
    return (int.from_bytes(digest[:8], "big") >> 11) * _TWO_M53


def derive_seed(root: int, *path: int) -> int:
    """Child seed for ``path`` below ``root`` (e.g. a trial index)."""
    data = b"perco-seed" + struct.pack("<Q", _check_seed(root))
    for part in path:
        data += struct.pack("<q", part)
    return int.from_bytes(_blake2b(data, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class ConfigSample:
    """Lazily evaluated percolation configuration on T_{d,k}."""

    params: ModelParams
    seed: int
    _seed_bytes: bytes = field(init=False, repr=False, compare=False)
    _short_tails: tuple = field(init=False, repr=False, compare=False)
    _long_tails: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_seed(self.seed)
        object.__setattr__(self, "_seed_bytes", struct.pack("<Q", self.seed))
        d, k = self.params.d, self.params.k
        object.__setattr__(self, "_short_tails", tuple((a, bytes((a,))) for a in range(1, d + 1)))
        object.__setattr__(self, "_long_tails", tuple((r, bytes(r)) for r in words(d, k)))

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def k(self) -> int:
        return self.params.k

    def with_params(self, p: Optional[float] = None, q: Optional[float] = None) -> "ConfigSample":
        """Same seed, different thresholds (common random numbers)."""
        pr = self.params
        return ConfigSample(
            ModelParams(pr.d, pr.k, pr.p if p is None else p, pr.q if q is None else q),
            self.seed,
        )

    def uniform(self, edge: Edge) -> float:
        check_edge(edge, self.params.d, self.params.k)
        return uniform_from_bytes(edge_bytes(edge, self.seed))

    def state(self, edge: Edge) -> bool:
        """True iff ``edge`` is open."""
        check_edge(edge, self.params.d, self.params.k)
        return self.state_unchecked(edge)

    def state_unchecked(self, edge: Edge) -> bool:
        t = self.params.p if edge.kind == Kind.SHORT else self.params.q
        if t <= 0.0:
            return False
        if t >= 1.0:
            return True
        return uniform_from_bytes(edge_bytes(edge, self.seed)) < t

    # Bulk queries used by the explorers; they skip validation.

    def open_children(self, u: Vertex) -> List[int]:
        """Labels ``a`` with the short edge <u, u.a> open."""
        p = self.params.p
        if p <= 0.0:
            return []
        if p >= 1.0:
            return [a for a, _ in self._short_tails]
        pre = b"\x00" + struct.pack("<I", len(u)) + bytes(u)
        sb = self._seed_bytes
        out = []
        for a, ab in self._short_tails:
            digest = _blake2b(pre + ab + sb, digest_size=16).digest()
            if (int.from_bytes(digest[:8], "big") >> 11) * _TWO_M53 < p:
                out.append(a)
        return out

    def open_long(self, u: Vertex) -> List[tuple]:
        """Suffixes ``r`` with the long edge <u, u.r> open."""
        q = self.params.q
        if q <= 0.0:
            return []
        if q >= 1.0:
            return [r for r, _ in self._long_tails]
        pre = b"\x01" + struct.pack("<I", len(u)) + bytes(u)
        sb = self._seed_bytes
        out = []
        for r, rb in self._long_tails:
            digest = _blake2b(pre + rb + sb, digest_size=16).digest()
            if (int.from_bytes(digest[:8], "big") >> 11) * _TWO_M53 < q:
                out.append(r)
        return out


def new_config(params: ModelParams, seed: int) -> ConfigSample:
    if not isinstance(params, ModelParams):
        raise TypeError("params must be a ModelParams")
    return ConfigSample(params, seed)


def edge_state(cfg, edge: Edge) -> bool:
    return cfg.state(edge)


class OverlayConfig:
    """A configuration with some edge states pinned over a lazy base.

    Used by the joint exploration, where revealed states come from a coupling
    rather than from the hash.
    """

    def __init__(self, base: ConfigSample, pinned: Optional[Dict[Edge, bool]] = None):
        self.base = base
        self.params = base.params
        self.pinned: Dict[Edge, bool] = {} if pinned is None else pinned

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def k(self) -> int:
        return self.params.k

    def pin(self, edge: Edge, state: bool) -> None:
        old = self.pinned.get(edge)
        if old is not None and old != state:
            raise ValueError(f"edge {edge} already pinned to {old}")
        self.pinned[edge] = bool(state)

    def state(self, edge: Edge) -> bool:
        check_edge(edge, self.params.d, self.params.k)
        return self.state_unchecked(edge)

    def state_unchecked(self, edge: Edge) -> bool:
        s = self.pinned.get(edge)
        return self.base.state_unchecked(edge) if s is None else s

    def open_children(self, u: Vertex) -> List[int]:
        pinned = self.pinned
        out = []
        base_open = None
        for a in range(1, self.params.d + 1):
            s = pinned.get(Edge(u, (a,), Kind.SHORT))
            if s is None:
                if base_open is None:
                    base_open = set(self.base.open_children(u))
                s = a in base_open
            if s:
                out.append(a)
        return out

    def open_long(self, u: Vertex) -> List[tuple]:
        pinned = self.pinned
        out = []
        base_open = None
        for r in words(self.params.d, self.params.k):
            s = pinned.get(Edge(u, r, Kind.LONG))
            if s is None:
                if base_open is None:
                    base_open = set(self.base.open_long(u))
                s = r in base_open
            if s:
                out.append(r)
        return out
