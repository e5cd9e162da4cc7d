"""Triplet sampling, the training loop and multi-run ensembling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .compatibility import LossWeights, training_loss
from .data import Dataset, FCQuestion, canonical_pair
from .errors import ConsistencyError
from .model import FUSION_KINDS, ModelDims, OutfitModel, init_model
from .optim import Adam

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    fusion: str = "baseline"
    epochs: int = 10
    learning_rate: float = 5e-5
    batch_size: int = 128
    lambda_vsim: float = 5e-5
    lambda_tsim: float = 5e-5
    lambda_vse: float = 5e-3
    margin: float = 0.2
    hops: int = 2
    mfb_factor: int = 2
    d_g: int = 512
    d_c: int = 512
    h: int = 512
    seed: int = 0
    runs: int = 5

    def validate(self) -> None:
        if self.fusion not in FUSION_KINDS:
            raise ValueError(f"fusion must be one of {FUSION_KINDS}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("batch_size", "hops", "mfb_factor",
                     "d_g", "d_c", "h", "runs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        LossWeights(self.lambda_vsim, self.lambda_tsim, self.lambda_vse,
                    self.margin)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_vsim, self.lambda_tsim,
                           self.lambda_vse, self.margin)


@dataclass
class TripletSpec:
    anchor: str
    positive: str
    negative: str
    type_u: str
    type_v: str


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    valid_auc: float | None
    skipped_pairs: int
    step_losses: list[float] = field(default_factory=list)


def sample_triplets(dataset: Dataset, rng: np.random.Generator
                    ) -> tuple[list[TripletSpec], int]:
    """One epoch of triplets: every ordered co-occurring described pair,
    shuffled, with a same-type negative never co-occurring with the anchor.

    Returns (triplets, skipped) where skipped counts pairs with no valid
    negative.
    """
    items = dataset.items
    co_occur: dict[str, set[str]] = {}
    pools: dict[str, list[str]] = {}
    pool_seen: set[str] = set()
    ordered_pairs: list[tuple[str, str]] = []
    for outfit in dataset.outfits.get("train", []):
        members = [i for i in outfit.items if items[i].described]
        for a in members:
            co_occur.setdefault(a, set()).update(m for m in members if m != a)
            if a not in pool_seen:
                pool_seen.add(a)
                pools.setdefault(items[a].type.name, []).append(a)
        for a in members:
            for b in members:
                if a != b:
                    ordered_pairs.append((a, b))

    order = rng.permutation(len(ordered_pairs))
    triplets: list[TripletSpec] = []
    skipped = 0
    for k in order:
        a, b = ordered_pairs[int(k)]
        type_v = items[b].type.name
        pool = pools[type_v]
        banned = co_occur[a]
        negative = None
        # rejection sampling stays uniform over the eligible set
        for _ in range(16):
            cand = pool[int(rng.integers(len(pool)))]
            if cand != a and cand not in banned:
                negative = cand
                break
        if negative is None:
            eligible = [c for c in pool if c != a and c not in banned]
            if not eligible:
                skipped += 1
                continue
            negative = eligible[int(rng.integers(len(eligible)))]
        triplets.append(TripletSpec(anchor=a, positive=b, negative=negative,
                                    type_u=items[a].type.name, type_v=type_v))
    return triplets, skipped


def _batch_arrays(dataset: Dataset, triplets: list[TripletSpec]
                  ) -> tuple[tuple, tuple, dict]:
    items = dataset.items
    roles = ["anchor", "positive", "negative"]
    regions = tuple(np.stack([items[getattr(t, r)].regions for t in triplets])
                    for r in roles)
    words = tuple(np.stack([items[getattr(t, r)].words for t in triplets])
                  for r in roles)
    groups: dict[tuple[str, str], list[int]] = {}
    for i, t in enumerate(triplets):
        groups.setdefault(canonical_pair(t.type_u, t.type_v), []).append(i)
    pair_groups = {k: np.asarray(v, dtype=np.intp) for k, v in groups.items()}
    return regions, words, pair_groups


def _validation_questions(dataset: Dataset, seed: int) -> list[FCQuestion]:
    """FC-style questions from the valid split: real outfits vs random
    cross-outfit recombinations with distinct types."""
    outfits = dataset.outfits.get("valid", [])
    described = [o for o in outfits
                 if all(dataset.items[i].described for i in o.items)]
    if len(described) < 2:
        return []
    rng = np.random.default_rng(seed ^ 0x5F3759DF)
    pool = [i for o in described for i in o.items]
    questions = [FCQuestion(items=o.items, label=1) for o in described]
    for o in described:
        size = len(o.items)
        for _ in range(32):
            picks = rng.choice(len(pool), size=size, replace=False)
            chosen = [pool[int(p)] for p in picks]
            if len({dataset.items[c].type.name for c in chosen}) == size:
                questions.append(FCQuestion(items=tuple(chosen), label=0))
                break
    return questions


def train(dataset: Dataset, config: TrainConfig,
          seed: int | None = None) -> tuple[OutfitModel, list[EpochStats]]:
    """Train one model; deterministic in (dataset, config, seed)."""
    from .evaluation import fc_scores_and_labels, fc_auc

    config.validate()
    seed = config.seed if seed is None else seed
    dims = ModelDims(d_g=config.d_g, d_c=config.d_c, h=config.h,
                     hops=config.hops, mfb_factor=config.mfb_factor,
                     region_dim=dataset.dims.region_dim,
                     word_dim=dataset.dims.word_dim)
    pairs = dataset.trained_type_pairs()
    if not pairs:
        raise ConsistencyError("no trainable type pairs in the train split")
    model = init_model(config.fusion, dims, pairs, seed)
    params = model.parameters()
    optimizer = Adam([p for _, p in params], lr=config.learning_rate)
    weights = config.weights()
    rng = np.random.default_rng(seed)
    valid_questions = _validation_questions(dataset, seed)

    history: list[EpochStats] = []
    step = 0
    for epoch in range(config.epochs):
        triplets, skipped = sample_triplets(dataset, rng)
        step_losses: list[float] = []
        for start in range(0, len(triplets), config.batch_size):
            batch = triplets[start:start + config.batch_size]
            regions, words, pair_groups = _batch_arrays(dataset, batch)
            terms: dict[str, float] = {}
            loss = training_loss(model, regions, words, pair_groups, weights,
                                 terms_out=terms)
            value = loss.item()
            if not np.isfinite(value):
                raise ConsistencyError(
                    f"non-finite loss at epoch {epoch} step {step}: {terms}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step(strict=False)
            step_losses.append(value)
            step += 1
        valid_auc = None
        if valid_questions:
            scores, labels, _, _ = fc_scores_and_labels(
                dataset, valid_questions, model)
            if len(set(labels)) == 2:
                valid_auc = fc_auc(scores, labels)
        stats = EpochStats(epoch=epoch,
                           mean_loss=float(np.mean(step_losses))
                           if step_losses else float("nan"),
                           valid_auc=valid_auc, skipped_pairs=skipped,
                           step_losses=step_losses)
        history.append(stats)
        log.info("epoch %d: loss %.5f valid_auc %s skipped %d",
                 epoch, stats.mean_loss,
                 f"{valid_auc:.4f}" if valid_auc is not None else "n/a",
                 skipped)
    return model, history


def train_ensemble(dataset: Dataset, config: TrainConfig
                   ) -> list[tuple[OutfitModel, list[EpochStats]]]:
    """`runs` independent trainings with seeds seed, seed+1, ..."""
    return [train(dataset, config, seed=config.seed + i)
            for i in range(config.runs)]
