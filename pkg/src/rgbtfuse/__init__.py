"""Wavelet cross-layer fusion, offset alignment, GeoShape assignment and
object-centred KL consistency for visible/thermal feature maps."""
from .align import (
    DsrParams,
    OffsetField,
    aam_align,
    dsr_refine,
    grid_sample,
    predict_offsets,
)
from .assign import (
    BACKGROUND,
    AssignmentResult,
    Box,
    GeoShapeParams,
    assign_labels,
    center_distance,
    dual_score,
    geoshape,
    geoshape_grad,
    giou,
    iou,
    ratio_distance,
)
from .estimators import CrossLayerFuser, GeoShapeAssigner, ScaleRefiner, ShiftRegistrar
from .loss import (
    LossComponents,
    RegionSpec,
    crop_region,
    mean_region_kl,
    region_kl,
    region_kl_grad,
    total_loss,
)
from .tensor import (
    ConvParams,
    channel_softmax,
    concat_channels,
    conv2d,
    deconv2d,
    global_avg_pool,
    read_fmap,
    write_fmap,
)
from .wavelet import ClfmParams, WaveletBands, clfm_fuse, dwt_haar, idwt_haar

__version__ = "0.1.0"
