"""Training configuration, triplet sampling and the training loop."""

import dataclasses

import numpy as np
import pytest
import scipy.stats

from outfitrec.data import (Dataset, Dims, Item, ItemType, Outfit,
                            SyntheticSpec, generate_synthetic)
from outfitrec.model import init_model, ModelDims
from outfitrec.training import (TrainConfig, sample_triplets, train,
                                train_ensemble)

SMALL_SPEC = SyntheticSpec(num_types=4, num_styles=3, train_outfits=30,
                           valid_outfits=6, fc_questions=20, fitb_questions=10,
                           outfit_size=3, num_regions=4, num_words=3,
                           region_dim=6, word_dim=5, signal_rows=2)

TINY_CONFIG = TrainConfig(fusion="baseline", epochs=1, learning_rate=1e-3,
                          batch_size=32, d_g=8, d_c=8, h=8, runs=1)


def handmade_dataset(outfit_specs):
    """outfit_specs: list of lists of (item_id, type_name)."""
    type_names = sorted({t for spec in outfit_specs for _, t in spec})
    types = [ItemType(n, i) for i, n in enumerate(type_names)]
    by_name = {t.name: t for t in types}
    dims = Dims(num_regions=2, num_words=2, region_dim=3, word_dim=3)
    rng = np.random.default_rng(0)
    items = {}
    outfits = []
    for k, spec in enumerate(outfit_specs):
        for item_id, type_name in spec:
            if item_id not in items:
                items[item_id] = Item(
                    id=item_id, type=by_name[type_name],
                    regions=rng.normal(size=(2, 3)),
                    words=rng.normal(size=(2, 3)), description="x")
        outfits.append(Outfit(id=f"o{k}", items=tuple(i for i, _ in spec)))
    return Dataset(items=items, types=types, dims=dims,
                   outfits={"train": outfits, "valid": [], "test": []},
                   fc_questions=[], fitb_questions=[])


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.epochs == 10
        assert cfg.learning_rate == 5e-5
        assert cfg.batch_size == 128
        assert cfg.lambda_vsim == cfg.lambda_tsim == 5e-5
        assert cfg.lambda_vse == 5e-3
        assert cfg.margin == 0.2
        assert cfg.hops == 2 and cfg.mfb_factor == 2
        assert cfg.d_g == cfg.d_c == cfg.h == 512
        assert cfg.runs == 5

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="learning_rte"):
            TrainConfig.from_dict({"learning_rte": 1e-3})

    def test_round_trips_through_dict(self):
        cfg = dataclasses.replace(TINY_CONFIG, fusion="stacked")
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg

    def test_invalid_values_rejected(self):
        for bad in ({"fusion": "mlp"}, {"epochs": -1},
                    {"learning_rate": 0.0}, {"runs": 0}, {"margin": -0.1}):
            with pytest.raises(ValueError):
                TrainConfig.from_dict(bad)


class TestSampleTriplets:
    def test_sampled_triplets_satisfy_constraints(self):
        ds = generate_synthetic(SMALL_SPEC, seed=0)
        triplets, _ = sample_triplets(ds, np.random.default_rng(1))
        assert triplets
        co_occur = {}
        for o in ds.outfits["train"]:
            for a in o.items:
                co_occur.setdefault(a, set()).update(o.items)
        for t in triplets:
            assert t.positive in co_occur[t.anchor]
            assert ds.items[t.negative].type.name == t.type_v
            assert t.negative not in co_occur[t.anchor]
            assert t.negative != t.anchor
            for item_id in (t.anchor, t.positive, t.negative):
                assert ds.items[item_id].described

    def test_pairs_without_valid_negative_are_skipped(self):
        ds = handmade_dataset([[("a", "tops"), ("b", "shoes")]])
        triplets, skipped = sample_triplets(ds, np.random.default_rng(0))
        assert triplets == []
        assert skipped == 2  # both ordered pairs of the single outfit

    def test_two_outfits_force_the_only_eligible_negative(self):
        ds = handmade_dataset([[("a", "tops"), ("b", "shoes")],
                               [("c", "tops"), ("d", "shoes")]])
        triplets, skipped = sample_triplets(ds, np.random.default_rng(0))
        assert skipped == 0
        forced = {("a", "b"): "d", ("b", "a"): "c",
                  ("c", "d"): "b", ("d", "c"): "a"}
        for t in triplets:
            assert t.negative == forced[(t.anchor, t.positive)]

    def test_negative_choice_is_uniform(self):
        # anchor "a" has five eligible same-type negatives d1..d5
        outfits = [[("a", "tops"), ("b", "shoes")]]
        outfits += [[(f"c{i}", "tops"), (f"d{i}", "shoes")] for i in range(5)]
        ds = handmade_dataset(outfits)
        rng = np.random.default_rng(2)
        counts = {f"d{i}": 0 for i in range(5)}
        for _ in range(3000):
            for t in sample_triplets(ds, rng)[0]:
                if (t.anchor, t.positive) == ("a", "b"):
                    counts[t.negative] += 1
        observed = np.array([counts[f"d{i}"] for i in range(5)])
        assert observed.sum() == 3000
        assert scipy.stats.chisquare(observed).pvalue > 0.01

    def test_undescribed_items_never_sampled(self):
        spec = dataclasses.replace(SMALL_SPEC, undescribed_frac=0.4)
        ds = generate_synthetic(spec, seed=3)
        assert any(not i.described for i in ds.items.values())
        triplets, _ = sample_triplets(ds, np.random.default_rng(4))
        for t in triplets:
            for item_id in (t.anchor, t.positive, t.negative):
                assert ds.items[item_id].described


class TestTrainLoop:
    def test_zero_epochs_return_initialization(self):
        ds = generate_synthetic(SMALL_SPEC, seed=5)
        cfg = dataclasses.replace(TINY_CONFIG, epochs=0, seed=7)
        model, history = train(ds, cfg)
        assert history == []
        dims = ModelDims(d_g=8, d_c=8, h=8, hops=2, mfb_factor=2,
                         region_dim=6, word_dim=5)
        fresh = init_model("baseline", dims, ds.trained_type_pairs(), seed=7)
        for (name, p), (fname, fp) in zip(model.parameters(),
                                          fresh.parameters()):
            assert name == fname
            np.testing.assert_array_equal(p.data, fp.data)

    def test_same_seed_is_bit_deterministic(self):
        ds = generate_synthetic(SMALL_SPEC, seed=6)
        losses = []
        for _ in range(2):
            _, history = train(ds, TINY_CONFIG, seed=11)
            losses.append(history[0].step_losses[:10])
        assert losses[0] == losses[1]

    def test_loss_decreases_over_epochs(self):
        ds = generate_synthetic(SMALL_SPEC, seed=7)
        cfg = dataclasses.replace(TINY_CONFIG, epochs=5)
        _, history = train(ds, cfg, seed=0)
        assert history[-1].mean_loss < history[0].mean_loss

    def test_validation_auc_is_reported(self):
        ds = generate_synthetic(SMALL_SPEC, seed=8)
        _, history = train(ds, TINY_CONFIG, seed=1)
        assert history[0].valid_auc is not None
        assert 0.0 <= history[0].valid_auc <= 1.0


class TestEnsemble:
    def test_single_run(self):
        ds = generate_synthetic(SMALL_SPEC, seed=9)
        runs = train_ensemble(ds, dataclasses.replace(TINY_CONFIG, runs=1))
        assert len(runs) == 1

    def test_runs_use_distinct_seeds(self):
        ds = generate_synthetic(SMALL_SPEC, seed=10)
        cfg = dataclasses.replace(TINY_CONFIG, runs=3, seed=2)
        runs = train_ensemble(ds, cfg)
        first_losses = [hist[0].step_losses[0] for _, hist in runs]
        assert len(set(first_losses)) == 3
