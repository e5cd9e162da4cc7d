"""Model container: projections, fusion parameters, type-pair spaces.

Checkpoints are a magic line, a JSON header (version, fusion kind, dims,
type-pair key table, parameter names/shapes) and a little-endian float32
payload holding the parameter tensors in header order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import canonical_pair
from .embedding import (CommonSpaceProjector, init_projector, pool_average,
                        project_regions, project_words, uniform_init)
from .errors import DatasetError, DimensionError, UnseenTypePairError
from .fusion import (CoAttentionParams, StackedAttentionParams,
                     coattention_param_list, fuse_coattention,
                     fuse_dot_product, fuse_stacked, init_coattention_params,
                     init_stacked_params, stacked_param_list)
from .tensor import Tensor, as_tensor

FUSION_KINDS = ("baseline", "dot_product", "stacked", "coattention")

CHECKPOINT_MAGIC = b"OUTFITREC-CKPT\n"
CHECKPOINT_VERSION = 1


@dataclass
class ModelDims:
    d_g: int
    d_c: int
    h: int
    hops: int
    mfb_factor: int
    region_dim: int
    word_dim: int


@dataclass
class OutfitModel:
    fusion: str
    dims: ModelDims
    projector: CommonSpaceProjector
    stacked: StackedAttentionParams | None
    coattention: CoAttentionParams | None
    spaces: dict[tuple[str, str], Tensor]   # canonical type pair -> (d_c, rep_dim)

    @property
    def rep_dim(self) -> int:
        return self.dims.d_g if self.fusion == "baseline" else 2 * self.dims.d_g

    def parameters(self) -> list[tuple[str, Tensor]]:
        out = [("proj.w_img", self.projector.w_img),
               ("proj.w_txt", self.projector.w_txt)]
        if self.stacked is not None:
            out += stacked_param_list(self.stacked)
        if self.coattention is not None:
            out += coattention_param_list(self.coattention)
        for (u, v) in sorted(self.spaces):
            out.append((f"space.{u}|{v}", self.spaces[(u, v)]))
        return out

    def has_space(self, type_u: str, type_v: str) -> bool:
        return canonical_pair(type_u, type_v) in self.spaces

    def space(self, type_u: str, type_v: str) -> Tensor:
        key = canonical_pair(type_u, type_v)
        try:
            return self.spaces[key]
        except KeyError:
            raise UnseenTypePairError(
                f"no compatibility space trained for type pair {key}") from None


def init_model(fusion: str, dims: ModelDims,
               type_pairs: set[tuple[str, str]], seed: int) -> OutfitModel:
    """Seeded initialization; one compatibility space per trained pair."""
    if fusion not in FUSION_KINDS:
        raise ValueError(f"unknown fusion kind {fusion!r}; expected {FUSION_KINDS}")
    rng = np.random.default_rng(seed)
    projector = init_projector(rng, dims.d_g, dims.region_dim, dims.word_dim)
    stacked = coatt = None
    if fusion == "stacked":
        stacked = init_stacked_params(rng, dims.d_g, dims.h, dims.hops)
    elif fusion == "coattention":
        coatt = init_coattention_params(rng, dims.d_g, dims.hops, dims.mfb_factor)
    rep_dim = dims.d_g if fusion == "baseline" else 2 * dims.d_g
    spaces = {}
    for (u, v) in sorted(canonical_pair(*pr) for pr in type_pairs):
        spaces[(u, v)] = uniform_init(rng, (dims.d_c, rep_dim), rep_dim,
                                      f"space.{u}|{v}")
    return OutfitModel(fusion=fusion, dims=dims, projector=projector,
                       stacked=stacked, coattention=coatt, spaces=spaces)


# -- representations ---------------------------------------------------------


def item_features(model: OutfitModel, regions, words,
                  weights_out: list | None = None
                  ) -> tuple[Tensor, Tensor, Tensor]:
    """Fused reps plus pooled unimodal common-space features for a batch.

    Returns (fused (B, rep_dim), pooled image (B, d_g), pooled text (B, d_g)).
    """
    x_rows = project_regions(as_tensor(regions), model.projector)
    y_rows = project_words(as_tensor(words), model.projector)
    x_pooled = pool_average(x_rows)
    t_pooled = pool_average(y_rows)
    if model.fusion == "baseline":
        fused = x_pooled
    elif model.fusion == "dot_product":
        fused = fuse_dot_product(x_rows, t_pooled, weights_out)
    elif model.fusion == "stacked":
        fused = fuse_stacked(x_rows, t_pooled, model.stacked, weights_out)
    else:
        fused = fuse_coattention(x_rows, y_rows, model.coattention, weights_out)
    return fused, x_pooled, t_pooled


def item_representations(model: OutfitModel, regions, words,
                         weights_out: list | None = None) -> Tensor:
    """Fused item vectors (B, rep_dim) for a batch of feature matrices."""
    return item_features(model, regions, words, weights_out)[0]


# -- checkpoint I/O ----------------------------------------------------------


def save_model(model: OutfitModel, path: str | Path) -> None:
    params = model.parameters()
    header = {
        "version": CHECKPOINT_VERSION,
        "fusion": model.fusion,
        "dims": vars(model.dims),
        "type_pairs": [list(k) for k in sorted(model.spaces)],
        "params": [{"name": n, "shape": list(t.shape)} for n, t in params],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, t in params:
            fh.write(np.asarray(t.data, dtype="<f4").tobytes())


def load_model(path: str | Path) -> OutfitModel:
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise DatasetError(f"{path}: not an outfitrec checkpoint")
    off = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<Q", raw, off)
    off += 8
    header = json.loads(raw[off:off + hlen].decode())
    off += hlen
    if header["version"] != CHECKPOINT_VERSION:
        raise DatasetError(f"{path}: unsupported checkpoint version")
    dims = ModelDims(**header["dims"])
    pairs = {tuple(k) for k in header["type_pairs"]}
    model = init_model(header["fusion"], dims, pairs, seed=0)
    by_name = dict(model.parameters())
    for meta in header["params"]:
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 4 * count
        if meta["name"] not in by_name:
            raise DatasetError(f"{path}: unexpected parameter {meta['name']!r}")
        target = by_name[meta["name"]]
        if target.shape != shape:
            raise DimensionError(
                f"{path}: parameter {meta['name']!r} has shape {shape}, "
                f"expected {target.shape}")
        values = np.frombuffer(raw[off:off + nbytes], dtype="<f4")
        if values.size != count:
            raise DatasetError(f"{path}: truncated payload at {meta['name']!r}")
        target.data = values.astype(np.float64).reshape(shape)
        off += nbytes
    return model
