"""Reference implementation and verification engine for a dual-resolution
boundary-aware segmentation network. Ships deterministic CPU kernels,
byte-specified tensor formats and parameter/FLOP accounting."""

from .accounting import (
    FLOP_CLAIM,
    FLOP_NOTE,
    PARAM_CLAIM,
    ClaimVerdict,
    CostReport,
    CostRow,
    count_macs,
    count_params,
    verify_claims,
)
from .boundary import (
    BOUNDARY_STRIDES,
    BOUNDARY_THRESHOLD,
    BoundaryMap,
    LabelMap,
    boundary_ground_truth,
    laplacian_response,
)
from .errors import (
    ConfigurationError,
    DRBANetError,
    FormatError,
    NumericError,
    ShapeError,
)
from .losses import LossBreakdown, LossWeights, bce_loss, cross_entropy, dice_loss, total_loss
from .metrics import CLASS_NAMES_19, ConfusionMatrix, class_names
from .network import (
    REFERENCE_LAYOUT_1024,
    ForwardOutputs,
    NetworkPlan,
    WeightStore,
    build_plan,
    check_cover,
    forward,
    init_weights,
    load_weights,
    save_weights,
)
from .ops import (
    AffineNorm,
    ConvSpec,
    add,
    affine_norm,
    avg_pool,
    bilinear_upsample,
    concat_channels,
    conv2d,
    get_num_threads,
    global_avg_pool,
    relu,
    set_num_threads,
)
from .pgm import read_pgm, write_pgm
from .tensor import Tensor, read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AffineNorm",
    "BOUNDARY_STRIDES",
    "BOUNDARY_THRESHOLD",
    "BoundaryMap",
    "CLASS_NAMES_19",
    "ClaimVerdict",
    "ConfigurationError",
    "ConfusionMatrix",
    "ConvSpec",
    "CostReport",
    "CostRow",
    "DRBANetError",
    "FLOP_CLAIM",
    "FLOP_NOTE",
    "FormatError",
    "ForwardOutputs",
    "LabelMap",
    "LossBreakdown",
    "LossWeights",
    "NetworkPlan",
    "NumericError",
    "PARAM_CLAIM",
    "REFERENCE_LAYOUT_1024",
    "ShapeError",
    "Tensor",
    "WeightStore",
    "add",
    "affine_norm",
    "avg_pool",
    "bce_loss",
    "bilinear_upsample",
    "boundary_ground_truth",
    "build_plan",
    "check_cover",
    "class_names",
    "concat_channels",
    "conv2d",
    "count_macs",
    "count_params",
    "cross_entropy",
    "dice_loss",
    "forward",
    "get_num_threads",
    "global_avg_pool",
    "init_weights",
    "laplacian_response",
    "load_weights",
    "read_pgm",
    "read_tensor",
    "relu",
    "save_weights",
    "set_num_threads",
    "total_loss",
    "verify_claims",
    "write_pgm",
    "write_tensor",
]
