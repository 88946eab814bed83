"""Attention mechanisms over (Q, K, V) with leading batch/head dimensions."""
from .common import AttentionOutput
from .full import SparsityPattern, build_sparsity_pattern, cached_pattern, full_attention, pattern_attention
from .kernel import kernel_attention, orthogonal_gaussian, random_feature_map
from .lowrank import linformer_attention
from .lsh import default_buckets, draw_rotations, lsh_attention, lsh_buckets
from .sinkhorn import sinkhorn_attention, sinkhorn_normalize
from .spec import AttentionSpec
from .synthesizer import synthesizer_attention

__all__ = [
    "AttentionOutput", "AttentionSpec", "SparsityPattern", "build_sparsity_pattern", "cached_pattern",
    "default_buckets", "draw_rotations", "full_attention", "kernel_attention", "linformer_attention",
    "lsh_attention", "lsh_buckets", "orthogonal_gaussian", "pattern_attention", "random_feature_map",
    "sinkhorn_attention", "sinkhorn_normalize", "synthesizer_attention",
]
