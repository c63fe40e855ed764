import math

import numpy as np
import pytest

from nspot.link import FitData, local_arrays
from nspot.sampler import (
    ChainConfig,
    ChainDivergedError,
    ChainState,
    FunctionTarget,
    ModelTarget,
    PosteriorSampleSet,
    Proposal,
    SelectionDisabledError,
    accept_move,
    gelman_rubin,
    inclusion_probabilities,
    init_state,
    mh_step,
    model_average,
    resample_indicators,
    run_chain,
    run_chains,
    tune_proposals,
)
from nspot.synth import synthetic_regression


def normal_target(dim=1):
    return FunctionTarget(lambda x: -0.5 * float(x @ x), dim)


def small_config(**kw):
    base = dict(n_iterations=4000, burn_in=1000, thin=10, proposal_scales=0.5, seed=3, adapt_every=500)
    base.update(kw)
    return ChainConfig(**base)


def test_init_state():
    s1 = init_state("model1", 2)
    np.testing.assert_array_equal(s1.theta, np.zeros(9))
    s2 = init_state("model2", 2)
    np.testing.assert_array_equal(s2.theta[:3], [1.0, 0.0, 0.0])
    assert not s2.theta[3:].any()
    for kind, state in (("model1", s1), ("model2", s2)):
        sigma, xi, rho, valid = local_arrays(kind, state.theta, 12.0, np.array([[1.0, 0.3, -2.0]]))
        assert (sigma[0], xi[0], rho[0], valid[0]) == (1.0, 0.0, 0.5, True)


def test_accept_rule():
    assert accept_move(0.1, 0.999)
    assert not accept_move(-math.inf, 0.0)
    assert not accept_move(math.nan, 0.5)
    rng = np.random.default_rng(0)
    hits = sum(accept_move(math.log(0.3), u) for u in rng.random(100_000))
    assert abs(hits / 100_000 - 0.3) < 0.005


class FixedSource:
    """Deterministic stand-in for a Generator: fixed normals and uniform."""

    def __init__(self, z, uniform):
        self.z, self.uniform = z, uniform

    def standard_normal(self, n):
        return np.full(n, self.z)

    def random(self):
        return self.uniform


def test_mh_step_uphill_always_accepted():
    target = FunctionTarget(lambda x: float(x[0]), 1)
    state = ChainState(np.zeros(1), np.ones(0, dtype=bool), 0.0)
    prop = Proposal.diagonal(np.array([0]), 1.0)
    new = mh_step(state, target, prop, FixedSource(0.5, 1.0 - 1e-12))
    assert new.theta[0] == 0.5 and new.log_lik == 0.5
    # a proposal into a zero-density region is always rejected
    wall = FunctionTarget(lambda x: 0.0 if x[0] < 0.1 else -math.inf, 1)
    assert mh_step(state, wall, prop, FixedSource(0.5, 0.0)) is state


def test_mh_step_rejects_model2_constraint_violation():
    C = np.ones((4, 1))
    data = FitData.from_arrays(C, np.array([1.0, 2.0, 12.0, 3.0]), 10.0)
    target = ModelTarget("model2", data)
    state = init_state("model2", 0, target)
    assert math.isfinite(state.log_lik)
    # shift alpha far negative so alpha + u beta < 0
    prop = Proposal(np.array([0]), np.array([[1.0]]), 1.0)
    assert mh_step(state, target, prop, FixedSource(-50.0, 0.0)) is state


@pytest.mark.parametrize("rate, direction", [(0.9, 1), (0.1, -1), (0.5, 0)])
def test_tuning_direction(rate, direction):
    new = tune_proposals(2.0, rate)
    assert np.sign(new - 2.0) == direction


def test_resample_indicators():
    rng = np.random.default_rng(4)
    draws = np.array([resample_indicators(rng, 3) for _ in range(100_000)])
    np.testing.assert_allclose(draws.mean(axis=0), 0.5, atol=0.005)
    counts = draws.sum(axis=1)
    assert counts.mean() == pytest.approx(1.5, abs=0.02)
    assert counts.var() == pytest.approx(0.75, abs=0.02)
    assert resample_indicators(rng, 0).shape == (0,)


def test_draw_count_and_iterations():
    out = run_chain(ChainConfig(n_iterations=1000, burn_in=500, thin=100, adapt_every=100), normal_target())
    assert out.n_draws == 5
    assert list(out.iterations) == [600, 700, 800, 900, 1000]


def test_determinism():
    target = normal_target(3)
    a = run_chain(small_config(), target)
    b = run_chain(small_config(), target)
    np.testing.assert_array_equal(a.theta, b.theta)
    assert a.meta == b.meta
    c = run_chain(small_config(seed=4), target)
    assert not np.array_equal(a.theta, c.theta)


def test_tuning_only_during_burn_in():
    out = run_chain(small_config(), normal_target(2))
    assert out.meta["tuning_log"]
    assert all(entry["iteration"] <= 1000 for entry in out.meta["tuning_log"])
    assert 0.3 <= out.meta["final_burn_in_accept_rate"] <= 0.7


def test_thinned_autocorrelation_is_low():
    out = run_chain(ChainConfig(n_iterations=60_000, burn_in=10_000, thin=50, proposal_scales=1.0, seed=8),
                    normal_target())
    x = out.theta[:, 0]
    assert np.corrcoef(x[:-1], x[1:])[0, 1] < 0.2


def test_divergence_guard():
    flat = FunctionTarget(lambda x: 0.0, 1)
    with pytest.raises(ChainDivergedError):
        run_chain(ChainConfig(n_iterations=5000, burn_in=1000, thin=1, proposal_scales=10.0,
                              divergence_guard=50.0), flat)


def test_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(n_iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        ChainConfig(thin=0)
    with pytest.raises(ValueError):
        ChainConfig(target_accept_band=(0.7, 0.3))
    with pytest.raises(ValueError):
        ChainConfig(selection_scheme="gibbs")
    with pytest.raises(ValueError):
        ChainConfig.from_dict({"iterations": 5})
    with pytest.raises(ValueError):
        ChainConfig(n_iterations=100, burn_in=50, selection_start=60)
    cfg = small_config(proposal_scales=[0.1, 0.2])
    assert ChainConfig.from_dict(cfg.to_dict()) == cfg


@pytest.fixture(scope="module")
def model_data():
    theta = np.r_[3.0, 0.3, 0.1, 0.1, 0.0, 0.0, 0.0, 0.1, -0.2, -1.5, 0.6, 0.0]
    design = synthetic_regression("model2", theta, 4000, 10.0, np.random.default_rng(12))
    return FitData.from_design(design)


@pytest.mark.parametrize("selection", [False, True])
def test_screened_sampler_matches_unscreened(model_data, selection):
    cfg = ChainConfig(n_iterations=3000, burn_in=1000, thin=5, proposal_scales=0.05, seed=9, adapt_every=400,
                      variable_selection=selection)
    fast = run_chain(cfg, ModelTarget("model2", model_data, screen=True))
    slow = run_chain(cfg, ModelTarget("model2", model_data, screen=False))
    np.testing.assert_array_equal(fast.theta, slow.theta)
    if selection:
        np.testing.assert_array_equal(fast.indicators, slow.indicators)
    assert fast.meta["screened_rejections"] > 0
    assert slow.meta["screened_rejections"] == 0


def test_fixed_coordinates_do_not_move(model_data):
    cfg = ChainConfig(n_iterations=2000, burn_in=500, thin=10, proposal_scales=0.05, seed=2, adapt_every=250)
    target = ModelTarget("model2", model_data)
    out = run_chain(cfg, target)
    assert np.all(out.theta[:, target.fixed] == 0.0)
    assert np.ptp(out.theta[:, ~target.fixed], axis=0).min() > 0


def test_csv_round_trip(tmp_path, model_data):
    cfg = ChainConfig(n_iterations=1200, burn_in=200, thin=10, proposal_scales=0.05, seed=1, adapt_every=100,
                      variable_selection=True)
    out = run_chain(cfg, ModelTarget("model2", model_data))
    out.write(tmp_path / "p.csv", tmp_path / "p.json")
    back = PosteriorSampleSet.read(tmp_path / "p.csv", tmp_path / "p.json")
    np.testing.assert_array_equal(back.theta, out.theta)
    np.testing.assert_array_equal(back.indicators, out.indicators)
    np.testing.assert_array_equal(back.iterations, out.iterations)
    assert back.kind == out.kind and back.coefficient_names == out.coefficient_names
    assert back.meta["tuning_log"] == out.meta["tuning_log"]


def test_model1_recovery():
    truth = np.r_[0.2, 0.3, 0.1, 0.0, -1.4, 0.5]
    design = synthetic_regression("model1", truth, 20_000, 5.0, np.random.default_rng(30))
    target = ModelTarget("model1", FitData.from_design(design))
    out = run_chain(ChainConfig(n_iterations=30_000, burn_in=10_000, thin=10, proposal_scales=0.02, seed=6,
                                adapt_every=2000), target)
    z = np.abs(np.median(out.theta, axis=0) - truth) / out.theta.std(axis=0)
    assert np.all(z < 3), z


def test_multi_chain_driver():
    cfg = small_config(n_chains=3)
    out = run_chains(cfg, normal_target(2))
    assert len(out.chains()) == 3
    assert out.n_draws == 3 * cfg.n_draws
    assert len(set(out.meta["chain_seeds"])) == 3
    assert all(v == pytest.approx(1.0, abs=0.1) for v in out.meta["gelman_rubin"].values())
    with pytest.raises(ValueError):
        gelman_rubin([np.zeros((5, 1))])


def sample_set(indicators, theta=None):
    indicators = np.asarray(indicators, dtype=bool)
    n, m = indicators.shape
    theta = np.ones((n, m + 1)) if theta is None else theta
    names = ["x_0"] + [f"x_{j}" for j in range(1, m + 1)]
    return PosteriorSampleSet("custom", names, [f"c{j}" for j in range(1, m + 1)], theta, indicators,
                              np.arange(n), 0.5)


def test_inclusion_probabilities():
    ind = np.column_stack([np.ones(6), np.arange(6) % 2])
    np.testing.assert_allclose(inclusion_probabilities(sample_set(ind)), [1.0, 0.5])
    plain = PosteriorSampleSet("custom", ["x_0"], [], np.zeros((3, 1)), None, np.arange(3), 0.5)
    with pytest.raises(SelectionDisabledError):
        inclusion_probabilities(plain)


def test_model_average():
    theta = np.tile([1.0, 2.0, 4.0], (4, 1))
    same = sample_set(np.ones((4, 2)), theta)
    summary = model_average(same, lambda t: t.sum())
    assert summary.mean == pytest.approx(7.0) and summary.lower == summary.upper == pytest.approx(7.0)
    mixed = sample_set([[1, 0], [0, 1], [1, 0], [0, 1]], theta)
    assert model_average(mixed, lambda t: t.sum()).mean == pytest.approx((3.0 + 5.0) / 2)


def test_selection_start_defaults():
    assert ChainConfig(burn_in=1000, selection_scheme="flip").first_selection_step == 500
    assert ChainConfig(burn_in=1000).first_selection_step == 0
    assert ChainConfig(burn_in=1000, selection_scheme="flip", selection_start=0).first_selection_step == 0


def test_indicators_frozen_before_selection_start(model_data):
    # with moves starting at the end of burn-in, the first kept draw is at most one flip from all-in
    for seed in range(5):
        cfg = ChainConfig(n_iterations=1001, burn_in=1000, thin=1, proposal_scales=0.05, seed=seed,
                          adapt_every=250, variable_selection=True, selection_scheme="flip", selection_start=1000)
        out = run_chain(cfg, ModelTarget("model2", model_data))
        assert out.indicators.shape == (1, 2) and out.indicators.sum() >= 1


def test_selection_prefers_signal_covariate():
    rng = np.random.default_rng(40)
    truth = np.r_[3.0, 0.0, 0.0, 0.08, 0, 0, 0.0, 0.0, 0.0, -1.5, 1.0, 0.0]
    design = synthetic_regression("model2", truth, 5000, 10.0, rng)
    target = ModelTarget("model2", FitData.from_design(design))
    cfg = ChainConfig(n_iterations=8000, burn_in=2000, thin=5, proposal_scales=0.05, seed=3, adapt_every=1000,
                      variable_selection=True, selection_scheme="flip")
    probs = inclusion_probabilities(run_chain(cfg, target))
    assert probs[0] > probs[1]
