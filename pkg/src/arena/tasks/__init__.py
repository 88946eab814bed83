"""Synthetic task generators: ListOps, Pathfinder / Path-X, pixel sequences."""
from .listops import (
    OPERATORS, VOCAB, VOCAB_SIZE, Node, encode_tokens, eval_listops, gen_listops, label_histogram, parse,
    read_listops_tsv, serialize, to_sequences, to_text, tokenize, write_listops_tsv,
)
from .pathfinder import (
    PathfinderParams, PathfinderScene, gen_pathfinder, make_scene, read_pixel_records, sidecar_for,
    write_pixel_records,
)
from .pixels import PixelSequence, image_to_sequence

__all__ = [
    "OPERATORS", "VOCAB", "VOCAB_SIZE", "Node", "PathfinderParams", "PathfinderScene", "PixelSequence",
    "encode_tokens", "eval_listops", "gen_listops", "gen_pathfinder", "image_to_sequence", "label_histogram",
    "make_scene", "parse", "read_listops_tsv", "read_pixel_records", "serialize", "sidecar_for", "to_sequences",
    "to_text", "tokenize", "write_listops_tsv", "write_pixel_records",
]
