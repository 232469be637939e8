"""Heterogeneous caching for masked video diffusion editing.

Latents are (frames, height, width, channels) float32 arrays; edit masks are
(frames, height, width) boolean arrays with True marking tokens to generate.
"""

from ._core import (
    AttnAggregate,
    ClusterResult,
    DitConfig,
    DitModel,
    Regime,
    SchedulerConfig,
    TimestepEmbedding,
    TokenPartition,
    __version__,
    attention_cost,
    decide_regime,
    ema_update,
    gaussian_latents,
    importance_scores,
    kmeans,
    l2_distance,
    modulated_input,
    partition_tokens,
    psnr,
    rel_l1_distance,
    run_baseline,
    run_denoise,
    select_representatives,
    ssim,
)

__all__ = [
    "AttnAggregate",
    "ClusterResult",
    "DitConfig",
    "DitModel",
    "Regime",
    "SchedulerConfig",
    "TimestepEmbedding",
    "TokenPartition",
    "__version__",
    "attention_cost",
    "decide_regime",
    "ema_update",
    "gaussian_latents",
    "importance_scores",
    "kmeans",
    "l2_distance",
    "modulated_input",
    "partition_tokens",
    "psnr",
    "rel_l1_distance",
    "run_baseline",
    "run_denoise",
    "select_representatives",
    "ssim",
]
