"""Fisheye camera geometry, angular rotary position embeddings, and BEV lifting."""

from .angular import BevGrid, BevGridSpec, PatchGrid, bev_angles, patch_angles
from .attention import (
    AttentionConfig,
    ProjectionWeights,
    TokenGrid,
    cross_attention,
    logit_matrix,
    self_attention,
    self_attention_jacobian,
    tokens_from_bev,
    tokens_from_patches,
)
from .camera import (
    AngularCoord,
    Extrinsics,
    InverseLut,
    KannalaBrandtCamera,
)
from .errors import (
    BehindCameraError,
    ConfigError,
    DomainError,
    EmptyAttentionError,
    EmptyOverlapError,
    FishropeError,
    FormatError,
    OutOfImageCircleError,
    ShapeError,
)
from .experiments import (
    BenchReport,
    CheckerPattern,
    LiftConfig,
    LiftReport,
    RetrievalBenchConfig,
    UniformPattern,
    bev_roundtrip,
    retrieval_bench,
    selfcheck,
)
from .rope import (
    ENCODINGS,
    FrequencySchedule,
    RotaryConfig,
    apply_axial_rope,
    apply_fishrope,
    make_schedule,
    relative_logit,
    rotate_pairs,
    sinusoidal_pe,
)

__version__ = "0.1.0"

__all__ = [
    "AngularCoord",
    "AttentionConfig",
    "BehindCameraError",
    "BenchReport",
    "BevGrid",
    "BevGridSpec",
    "CheckerPattern",
    "ConfigError",
    "DomainError",
    "EmptyAttentionError",
    "EmptyOverlapError",
    "ENCODINGS",
    "Extrinsics",
    "FishropeError",
    "FormatError",
    "FrequencySchedule",
    "InverseLut",
    "KannalaBrandtCamera",
    "LiftConfig",
    "LiftReport",
    "OutOfImageCircleError",
    "PatchGrid",
    "ProjectionWeights",
    "RetrievalBenchConfig",
    "RotaryConfig",
    "ShapeError",
    "TokenGrid",
    "UniformPattern",
    "apply_axial_rope",
    "apply_fishrope",
    "bev_angles",
    "bev_roundtrip",
    "cross_attention",
    "logit_matrix",
    "make_schedule",
    "patch_angles",
    "relative_logit",
    "retrieval_bench",
    "rotate_pairs",
    "self_attention",
    "self_attention_jacobian",
    "selfcheck",
    "sinusoidal_pe",
    "tokens_from_bev",
    "tokens_from_patches",
]
