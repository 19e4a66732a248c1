import numpy as np
import pytest

import axeseval as ae
from axeseval import datamodel as dm
from axeseval import probes as pr
from axeseval.axes import mig_score, make_fingerprint
from axeseval.errors import ConfigError, DegenerateError, EmptyError
from axeseval.metrics import metric_mse
from axeseval.synthworld import (
    FactorSpec,
    FactorWorldSpec,
    TransformModel,
    generate_world,
)

from conftest import build_dataset


@pytest.fixture(scope="module")
def planted_world(tmp_path_factory):
    """Instrument linearly readable from timbre; pitch labels unencoded."""
    spec = FactorWorldSpec(
        n_items=600, seed=101,
        dims={"timbre": 8, "structure": 14},
        factors=(
            FactorSpec(name="instrument_id", kind="categorical",
                       stream="timbre", k=4),
            FactorSpec(name="pitch_class", kind="categorical",
                       stream="structure", k=12, own_gain=0.0),
        ),
        noise_std=0.1,
        transforms={"pitch_shift": TransformModel(stream="structure",
                                                  kind="additive",
                                                  raw_scale=4.0)},
    )
    return spec, generate_world(spec, tmp_path_factory.mktemp("planted"))


@pytest.fixture(scope="module")
def additive_world(tmp_path_factory):
    """Noiseless additive transform; both axes exactly learnable."""
    spec = FactorWorldSpec(
        n_items=500, seed=102,
        dims={"timbre": 6, "structure": 8},
        factors=(
            FactorSpec(name="instrument_id", kind="categorical",
                       stream="timbre", k=4),
            FactorSpec(name="pitch_class", kind="categorical",
                       stream="structure", k=6),
        ),
        noise_std=0.0,
        transforms={"pitch_shift": TransformModel(stream="structure",
                                                  kind="additive",
                                                  raw_scale=4.0)},
    )
    return spec, generate_world(spec, tmp_path_factory.mktemp("additive"))


@pytest.fixture(scope="module")
def noise_world(tmp_path_factory):
    """Transformed embeddings replaced by fresh noise (n = 500, D = 16)."""
    spec = FactorWorldSpec(
        n_items=500, seed=103,
        dims={"timbre": 4, "structure": 16},
        factors=(FactorSpec(name="pitch_class", kind="categorical",
                            stream="structure", k=6),),
        noise_std=0.3,
        transforms={"pitch_shift": TransformModel(stream="structure",
                                                  kind="noise",
                                                  raw_scale=4.0)},
    )
    return spec, generate_world(spec, tmp_path_factory.mktemp("noise"))


INSTRUMENT_TASK = ae.TaskSpec(name="instrument", stream="timbre",
                              target="instrument_class", metric="accuracy")


class TestInformativeness:
    def test_planted_linear_readout(self, planted_world):
        _, manifest = planted_world
        result = ae.run_informativeness(manifest, INSTRUMENT_TASK, seed=0)
        assert result.value >= 0.99
        assert result.axis == "informativeness"
        assert result.metric == "accuracy"

    def test_unencoded_labels_stay_at_chance(self, planted_world):
        _, manifest = planted_world
        task = ae.TaskSpec(name="notes", stream="structure",
                           target="pitch_class", metric="accuracy")
        result = ae.run_informativeness(manifest, task, seed=0)
        assert 0.04 <= result.value <= 0.13

    def test_deterministic_per_fingerprint(self, planted_world):
        _, manifest = planted_world
        r1 = ae.run_informativeness(manifest, INSTRUMENT_TASK, seed=3)
        r2 = ae.run_informativeness(manifest, INSTRUMENT_TASK, seed=3)
        assert r1.config_fingerprint == r2.config_fingerprint
        assert r1.to_obj() == r2.to_obj()

    def test_multipitch_path(self, tmp_path_factory):
        spec = FactorWorldSpec(
            n_items=150, seed=104,
            dims={"timbre": 4, "structure": 8},
            factors=(
                FactorSpec(name="instrument_id", kind="categorical",
                           stream="timbre", k=3),
                FactorSpec(name="pitch_class", kind="categorical",
                           stream="structure", k=6),
            ),
            noise_std=0.05,
            frames={"structure": 4},
            pianoroll_from="pitch_class",
            pianoroll_frames=8,
            group_size=5,
        )
        manifest = generate_world(spec, tmp_path_factory.mktemp("mpe"))
        task = ae.TaskSpec(name="mpe", stream="structure", target="multipitch",
                           metric="f1_track")
        result = ae.run_informativeness(
            manifest, task, seed=0,
            overrides={"hidden_dim": 32, "max_epochs": 60, "patience": 8})
        assert result.value >= 0.9
        assert result.metric == "f1_track"


class TestPEquivariance:
    def test_ridge_oracle_recovers_param_then_probe_matches(self, additive_world):
        _, manifest = additive_world
        # oracle first: closed-form ridge on the pair features hits ~0 MSE
        pairs = dm.pair_views(manifest, "pitch_shift", "structure")
        x = np.stack([np.concatenate([dm.pool_time(c).data[0],
                                      dm.pool_time(t).data[0]])
                      for c, t, _ in pairs]).astype(np.float64)
        y = np.array([p for _, _, p in pairs])
        xb = np.hstack([x, np.ones((len(x), 1))])
        w = pr.closed_form_ridge(xb, y, 1e-10)
        assert metric_mse(xb @ w, y) <= 1e-8

        result = ae.run_p_equivariance(manifest, "structure", "pitch_shift",
                                       seed=0)
        assert result.value <= 1e-3
        assert result.metric == "mse"

    def test_constant_params_flagged_degenerate(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=120, seed=105,
            dims={"timbre": 4, "structure": 6},
            factors=(FactorSpec(name="pitch_class", kind="categorical",
                                stream="structure", k=6),),
            noise_std=0.05,
            transforms={"time_stretch": TransformModel(
                stream="structure", kind="additive", params_norm=(0.5,),
                raw_scale=0.25, raw_offset=1.0)},
        )
        manifest = generate_world(spec, tmp_path / "w")
        result = ae.run_p_equivariance(manifest, "structure", "time_stretch",
                                       seed=0)
        assert result.extra.get("degenerate_params") is True
        assert result.value <= 1e-3  # probe learns the constant

    def test_noise_control_matches_param_variance(self, noise_world):
        _, manifest = noise_world
        result = ae.run_p_equivariance(manifest, "structure", "pitch_shift",
                                       seed=0)
        assert abs(result.value - 1.0 / 3.0) <= 0.05

    def test_invariant_to_raw_reparameterization(self, tmp_path):
        # same param_norm values, different raw affine: identical MSE
        def world(scale, offset, out):
            spec = FactorWorldSpec(
                n_items=200, seed=106,
                dims={"timbre": 4, "structure": 6},
                factors=(FactorSpec(name="pitch_class", kind="categorical",
                                    stream="structure", k=6),),
                noise_std=0.0,
                transforms={"pitch_shift": TransformModel(
                    stream="structure", kind="additive",
                    raw_scale=scale, raw_offset=offset)},
            )
            return generate_world(spec, tmp_path / out)

        m1 = world(4.0, 0.0, "w1")
        m2 = world(12.0, 3.0, "w2")
        r1 = ae.run_p_equivariance(m1, "structure", "pitch_shift", seed=0)
        r2 = ae.run_p_equivariance(m2, "structure", "pitch_shift", seed=0)
        assert r1.value == r2.value


class TestREquivariance:
    def test_linear_action_in_hypothesis_class(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=500, seed=107,
            dims={"timbre": 4, "structure": 8},
            factors=(FactorSpec(name="pitch_class", kind="categorical",
                                stream="structure", k=6),),
            noise_std=0.0,
            transforms={"pitch_shift": TransformModel(stream="structure",
                                                      kind="linear",
                                                      raw_scale=4.0)},
        )
        manifest = generate_world(spec, tmp_path / "w")
        result = ae.run_r_equivariance(manifest, "structure", "pitch_shift",
                                       seed=0)
        assert result.value >= 0.99

    def test_additive_action(self, additive_world):
        _, manifest = additive_world
        result = ae.run_r_equivariance(manifest, "structure", "pitch_shift",
                                       seed=0)
        assert result.value >= 0.99

    def test_fresh_noise_gives_near_zero_cosine(self, noise_world):
        _, manifest = noise_world
        result = ae.run_r_equivariance(manifest, "structure", "pitch_shift",
                                       seed=0)
        assert abs(result.value) <= 0.1


class TestInvariance:
    def test_identity_views_give_exactly_one(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=60, seed=108,
            dims={"timbre": 4, "structure": 6},
            factors=(FactorSpec(name="pitch_class", kind="categorical",
                                stream="structure", k=6),),
            noise_std=0.05,
            transforms={"pitch_shift": TransformModel(
                stream="structure", kind="additive", params_norm=(0.0,),
                raw_scale=4.0)},
        )
        manifest = generate_world(spec, tmp_path / "w")
        assert ae.run_invariance(manifest, "structure", "pitch_shift").value == 1.0
        assert ae.run_invariance(manifest, "timbre", "pitch_shift").value == 1.0

    def test_negated_views_give_minus_one(self, tmp_path):
        streams = {"timbre": {"dim": 3, "frames": 1},
                   "structure": {"dim": 3, "frames": 1}}
        rng = np.random.default_rng(0)
        recs = []
        for i in range(4):
            base = rng.normal(size=(1, 3))
            recs.append({"item_id": f"b{i}", "split": "train",
                         "tensors": {"timbre": base, "structure": base},
                         "labels": {"group_id": "g"}})
            recs.append({
                "item_id": f"b{i}.v", "split": "train",
                "tensors": {"timbre": -base, "structure": -base},
                "labels": {"group_id": "g"},
                "view": {"base_item_id": f"b{i}", "transform": "instrument_change",
                         "param_raw": 0.75, "param_norm": 0.5},
            })
        path = build_dataset(tmp_path / "neg", streams, recs,
                             param_norm={"instrument_change":
                                         {"scale": 0.5, "offset": 0.5}})
        manifest = dm.load_manifest(path)
        result = ae.run_invariance(manifest, "timbre", "instrument_change")
        assert result.value == -1.0

    def test_probe_free_determinism(self, additive_world):
        _, manifest = additive_world
        r1 = ae.run_invariance(manifest, "structure", "pitch_shift")
        r2 = ae.run_invariance(manifest, "structure", "pitch_shift")
        assert r1.to_obj() == r2.to_obj()
        assert "std" in r1.extra

    def test_framewise_mode(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=60, seed=109,
            dims={"timbre": 4, "structure": 6},
            frames={"structure": 5},
            factors=(FactorSpec(name="pitch_class", kind="categorical",
                                stream="structure", k=6),),
            noise_std=0.05,
            transforms={"pitch_shift": TransformModel(stream="structure",
                                                      kind="additive",
                                                      raw_scale=4.0)},
        )
        manifest = generate_world(spec, tmp_path / "w")
        pooled = ae.run_invariance(manifest, "structure", "pitch_shift")
        framewise = ae.run_invariance(manifest, "structure", "pitch_shift",
                                      frame_wise=True)
        assert pooled.config_fingerprint != framewise.config_fingerprint
        assert -1.0 <= framewise.value <= 1.0


class TestDisentanglementDelta:
    def test_pure_noise_complement_is_small(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=800, seed=110,
            dims={"timbre": 6, "structure": 8},
            factors=(FactorSpec(name="instrument_id", kind="categorical",
                                stream="timbre", k=4),),
            noise_std=0.1,
        )
        manifest = generate_world(spec, tmp_path / "w")
        result = ae.run_disentanglement_delta(manifest, INSTRUMENT_TASK, seed=0)
        assert result.value <= 0.02

    def test_onehot_leak_into_complement_is_large(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=800, seed=111,
            dims={"timbre": 6, "structure": 8},
            factors=(FactorSpec(name="chord_type", kind="categorical",
                                stream="timbre", k=4, own_gain=0.0,
                                leak_gain=1.0),),
            noise_std=0.1,
        )
        manifest = generate_world(spec, tmp_path / "w")
        task = ae.TaskSpec(name="chords", stream="timbre",
                           target="chord_type", metric="accuracy")
        result = ae.run_disentanglement_delta(manifest, task, seed=0)
        assert result.value >= 0.5

    def test_delta_formula_on_recorded_raw_values(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=200, seed=112,
            dims={"timbre": 6, "structure": 8},
            factors=(FactorSpec(name="instrument_id", kind="categorical",
                                stream="timbre", k=4),),
            noise_std=0.3,
        )
        manifest = generate_world(spec, tmp_path / "w")
        result = ae.run_disentanglement_delta(manifest, INSTRUMENT_TASK, seed=0)
        assert result.value == abs(result.extra["concat_value"]
                                   - result.extra["own_value"])
        assert result.value >= 0.0


class TestMig:
    def test_planted_one_dim_per_factor(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=800, seed=113,
            dims={"timbre": 8, "structure": 4},
            factors=(
                FactorSpec(name="instrument_id", kind="categorical",
                           stream="timbre", k=4, encoding="scalar"),
                FactorSpec(name="chord_type", kind="categorical",
                           stream="timbre", k=4, encoding="scalar"),
            ),
            noise_std=0.02,
        )
        manifest = generate_world(spec, tmp_path / "w")
        result = ae.run_mig(manifest, "timbre",
                            ["instrument_id", "chord_type"])
        assert result.value >= 0.9

    def test_all_noise_dimensions(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=800, seed=114,
            dims={"timbre": 8, "structure": 4},
            factors=(
                FactorSpec(name="instrument_id", kind="categorical",
                           stream="timbre", k=4, own_gain=0.0),
                FactorSpec(name="chord_type", kind="categorical",
                           stream="timbre", k=4, own_gain=0.0),
            ),
            noise_std=0.3,
        )
        manifest = generate_world(spec, tmp_path / "w")
        result = ae.run_mig(manifest, "timbre",
                            ["instrument_id", "chord_type"])
        assert result.value <= 0.05

    def test_duplicated_dimension_zeroes_the_gap(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 4, 1000)
        encoded = y / 3.0
        x = np.column_stack([encoded, encoded, rng.normal(size=1000)])
        other = rng.integers(0, 3, 1000)
        _, gaps = mig_score(x, {"a": y, "b": other})
        assert gaps["a"] <= 0.01

    def test_constant_factor_degenerate(self):
        x = np.random.default_rng(0).normal(size=(50, 3))
        with pytest.raises(DegenerateError):
            mig_score(x, {"a": np.zeros(50, dtype=int),
                          "b": np.arange(50) % 2})

    def test_needs_two_factors(self):
        x = np.random.default_rng(0).normal(size=(50, 3))
        with pytest.raises(DegenerateError):
            mig_score(x, {"a": np.arange(50) % 2})


class TestTaskSpec:
    def test_metric_consistency_enforced(self):
        with pytest.raises(ConfigError):
            ae.TaskSpec(name="x", stream="timbre", target="instrument_class",
                        metric="mse")
        with pytest.raises(ConfigError):
            ae.TaskSpec(name="x", stream="timbre", target="tempo_regression",
                        metric="accuracy")
        with pytest.raises(ConfigError):
            ae.TaskSpec(name="x", stream="timbre", target="multipitch",
                        metric="accuracy")


class TestTempoRegression:
    def test_normalized_targets(self, tmp_path):
        spec = FactorWorldSpec(
            n_items=600, seed=115,
            dims={"timbre": 4, "structure": 8},
            factors=(
                FactorSpec(name="pitch_class", kind="categorical",
                           stream="structure", k=6),
                FactorSpec(name="tempo_bpm", kind="continuous",
                           stream="structure", lo=60.0, hi=180.0),
            ),
            noise_std=0.05,
        )
        manifest = generate_world(spec, tmp_path / "w")
        task = ae.TaskSpec(name="tempos", stream="structure",
                           target="tempo_regression", metric="mse")
        result = ae.run_informativeness(manifest, task, seed=0)
        # tempo is linearly encoded, so normalized-MSE must be tiny;
        # unnormalized bpm targets would sit at O(1000)
        assert result.value <= 0.01
