"""Self-check helpers: full-loss gradient verification on a tiny model."""

from __future__ import annotations

import numpy as np

from .compatibility import LossWeights, training_loss
from .model import ModelDims, init_model
from .optim import GradCheckReport, grad_check


def full_loss_grad_check(fusion: str, d_g: int = 8, d_c: int = 8, h: int = 8,
                         n_regions: int = 4, n_words: int = 3,
                         region_dim: int = 5, word_dim: int = 6,
                         hops: int = 2, mfb_factor: int = 2,
                         seed: int = 0, rel_tol: float = 1e-4,
                         h_scale: float = 1e-6) -> GradCheckReport:
    """Check every parameter's tape gradient of the total training loss
    against central finite differences on a small random triplet batch.

    The step is smaller than the primitive-op default because the composed
    loss contains ReLU kinks and the signed-sqrt's high-curvature region;
    h ~ 1e-6 keeps the finite-difference truncation error well below the
    tolerance while staying far above double-precision roundoff.
    """
    rng = np.random.default_rng(seed)
    dims = ModelDims(d_g=d_g, d_c=d_c, h=h, hops=hops, mfb_factor=mfb_factor,
                     region_dim=region_dim, word_dim=word_dim)
    pairs = {("typeA", "typeB"), ("typeA", "typeC")}
    model = init_model(fusion, dims, pairs, seed)
    batch = 3
    regions = tuple(rng.normal(size=(batch, n_regions, region_dim))
                    for _ in range(3))
    words = tuple(rng.normal(size=(batch, n_words, word_dim))
                  for _ in range(3))
    pair_groups = {("typeA", "typeB"): np.array([0, 1], dtype=np.intp),
                   ("typeA", "typeC"): np.array([2], dtype=np.intp)}
    weights = LossWeights()

    def loss_fn():
        return training_loss(model, regions, words, pair_groups, weights)

    return grad_check(loss_fn, model.parameters(), h_scale=h_scale,
                      rel_tol=rel_tol)
