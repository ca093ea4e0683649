"""Egocentric gaze prediction toolkit: python surface over the C++ core."""

from ._core import (
    __version__,
    auc_judd,
    blur_map,
    cc,
    density_from_points,
    evaluate_all,
    fit_center_prior,
    fixation_grid,
    generate_synthetic,
    kld,
    load_gaze,
    make_split,
    nss,
    param_count,
    predict_map,
    save_untrained_checkpoint,
    sim,
)

__all__ = [
    "__version__",
    "auc_judd",
    "blur_map",
    "cc",
    "density_from_points",
    "evaluate_all",
    "fit_center_prior",
    "fixation_grid",
    "generate_synthetic",
    "kld",
    "load_gaze",
    "make_split",
    "nss",
    "param_count",
    "predict_map",
    "save_untrained_checkpoint",
    "sim",
]
