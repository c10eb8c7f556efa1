"""Uncertainty-quantified Frechet autoencoder distance (FAED).

Thin bindings over the C++ core. Images are float64 arrays shaped
(n, channels, side, side) with values in [0, 1]; embeddings are
(n_inputs, n_samples, latent_dim).
"""

from ._core import (
    ArchitectureConfig,
    Autoencoder,
    TrainConfig,
    augment,
    faed_distribution,
    frechet_distance,
    metric_report,
    pvar,
    read_embeddings,
    synth_dataset,
    write_embeddings,
)

__all__ = [
    "ArchitectureConfig",
    "Autoencoder",
    "TrainConfig",
    "augment",
    "faed_distribution",
    "frechet_distance",
    "metric_report",
    "pvar",
    "read_embeddings",
    "synth_dataset",
    "write_embeddings",
]
