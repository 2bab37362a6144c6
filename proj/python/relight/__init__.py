"""Two-stage relighting: synthetic data, inference and metrics."""

import os

# A build tree keeps the compiled module apart from these sources.
if "RELIGHT_CORE_DIR" in os.environ:
    __path__.append(os.environ["RELIGHT_CORE_DIR"])

from ._core import (  # noqa: E402
    ConfigError,
    DataError,
    Relighter,
    compose,
    encode_light,
    f_ac,
    mps,
    planckian_rgb,
    psnr,
    psnr_from_mse,
    render,
    run_cli,
    ssim,
    validate,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Relighter",
    "compose",
    "encode_light",
    "f_ac",
    "mps",
    "planckian_rgb",
    "psnr",
    "psnr_from_mse",
    "render",
    "run_cli",
    "ssim",
    "validate",
]
