"""Motion-disentangled multi-frame depth on synthetic scenes.

Thin re-export of the compiled core. Images are float64 (H, W, C) arrays in
[0, 1], depth maps are (H, W) arrays with NaN marking invalid pixels, masks
are (H, W) bool arrays, and poses are (3, 4) [R | t] target-to-source maps.
"""

from ._domdepth import (  # noqa: F401
    CameraIntrinsics,
    CostVolume,
    DepthHypotheses,
    DisentangledFrame,
    FrameTriplet,
    SceneSpec,
    ValidationError,
    __version__,
    backproject,
    build_cost_volume,
    compute_metrics,
    cycle_consistency,
    disentangle,
    error_map,
    extract_depth,
    fill_occlusions,
    grad_check,
    make_prior,
    min_reprojection_loss,
    occlusion_aware_loss,
    parse_scene,
    photometric_error,
    project,
    refine_prior_loop,
    render_scene,
    smoothness,
    solve,
    warp_image,
)
