"""Quantum-classical hybrid networks for seismic data restoration."""

from ._qcseis import (
    ArchitectureMismatch,
    ConfigError,
    DivergenceError,
    FormatError,
    IoError,
    Model,
    RandomCircuit,
    ShapeError,
    amplitude_spectrum,
    build_dataset,
    expectation,
    expectation_grad,
    mae,
    psnr,
    quantum_forward,
    read_seis,
    resolve_config,
    rmse,
    ssim,
    synth_gather,
    train,
)

__all__ = [
    "ArchitectureMismatch",
    "ConfigError",
    "DivergenceError",
    "FormatError",
    "IoError",
    "Model",
    "RandomCircuit",
    "ShapeError",
    "amplitude_spectrum",
    "build_dataset",
    "expectation",
    "expectation_grad",
    "mae",
    "psnr",
    "quantum_forward",
    "read_seis",
    "resolve_config",
    "rmse",
    "ssim",
    "synth_gather",
    "train",
]
