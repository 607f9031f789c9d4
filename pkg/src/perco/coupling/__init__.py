"""Coupling constructions and their verification harnesses."""

from .comparison import (
    ComparisonCoupling,
    comparison_coupling,
    joint_q_prime,
    precedes,
    select_q_prime,
    support_words,
)
from .joint import EmbeddingWitness, JointResult, joint_exploration
from .laws import (
    FiniteLaw,
    LawsTooFarApart,
    ProductCoupling,
    enhance_coupling,
    max_marginal_error,
    support_violations,
)
from .tile import (
    TileConfig,
    TileCoupling,
    feasibility_window,
    special_point,
    tile_coupling_sample,
    tile_edges,
    tile_J,
    tile_violations,
)

AUDIT_HEADER = "sample_id,event,witness_ok,sizes"


def audit_line(sample_id: str, event: str, ok: bool, sizes) -> str:
    return f"{sample_id},{event},{int(bool(ok))},{':'.join(str(s) for s in sizes)}"
