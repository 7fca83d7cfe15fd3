"""Through-plane super-resolution MRI toolkit.

Thin wrapper around the C++ core. Volumes travel as float64 numpy arrays
shaped (echoes, nz, ny, nx); see MultiEchoVolume.
"""

import json as _json

from ._core import (  # noqa: F401
    ComputeError,
    MultiEchoVolume,
    Network,
    NormalizationRecord,
    ScanParams,
    T2Map,
    ValidationError,
    agreement_report,
    ccc,
    cv_percent,
    default_phantom_spec_json,
    degrade_slices,
    denormalize,
    design_lowpass,
    estimate_t2,
    forward,
    fourier_upsample,
    infer_volume,
    init_network,
    load_volume,
    load_weights,
    loss_and_gradients,
    mann_whitney_u,
    mean_difference,
    normalize,
    patch_grid_origins,
    psnr,
    rmse,
    roi_mean_t2,
    save_volume,
    save_weights,
    ssim,
    surgery_expand,
    train,
    tricubic_upsample,
)
from ._core import generate_phantom as _generate_phantom


def default_phantom_spec():
    """The stock desk-scale phantom spec as a dict."""
    return _json.loads(default_phantom_spec_json())


def generate_phantom(spec=None, scan=None):
    """Rasterize a phantom.

    spec may be a dict (mirroring the spec JSON), a JSON string, or None
    for the default phantom. Returns (MultiEchoVolume, T2Map).
    """
    if isinstance(spec, dict):
        spec = _json.dumps(spec)
    if scan is None:
        scan = ScanParams()
    return _generate_phantom(spec, scan)
