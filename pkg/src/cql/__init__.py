"""Category-query interaction classifier.

Learnable per-category query embeddings are refined against image features
by a small transformer decoder and serve double duty: an image-level
multi-label classifier (trained with focal or asymmetric loss) and adaptive
cosine classification weights for human-object instance features, optionally
sharpened by hard/soft score integration. A synthetic-scene harness trains
and evaluates the whole thing end to end with IoU-matched average precision
and per-density analysis; a CLI exposes train/eval/ablate/attn.
"""

__version__ = "0.1.0"
