# SPDX-License-Identifier: Apache-2.0
"""Spectrum-map reconstruction from sparse point measurements.

Thin Python surface over the C++ core: synthetic map generation, diffusion
schedules, prior training/loading, posterior reconstruction (linear or
quantized sensors), the IDW baseline, uncertainty-guided measurement
selection and PSNR/MSE metrics. Maps are 2-D float64 numpy arrays;
observation masks are 1-D arrays of linear pixel indices.
"""

from ._core import (
    AnalyticGaussianPrior,
    CompatibilityError,
    ConfigError,
    IoError,
    LearnedModel,
    NumericalError,
    Prior,
    Schedule,
    generate_dataset,
    generate_map,
    idw,
    kmeans_select,
    load_model,
    mills_shift,
    mse,
    psnr,
    reconstruct,
    train_model,
)

__all__ = [
    "AnalyticGaussianPrior",
    "CompatibilityError",
    "ConfigError",
    "IoError",
    "LearnedModel",
    "NumericalError",
    "Prior",
    "Schedule",
    "generate_dataset",
    "generate_map",
    "idw",
    "kmeans_select",
    "load_model",
    "mills_shift",
    "mse",
    "psnr",
    "reconstruct",
    "train_model",
]

__version__ = "0.1.0"
