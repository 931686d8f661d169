"""Tests for sampling, empirical risks, gradients, and the training loop."""

import dataclasses

import numpy as np
import pytest

from rmlab.exact import solve_modified, solve_original
from rmlab.network import NetworkParams, init_xavier, param_count
from rmlab.training import (
    NumericalAbort,
    TrainConfig,
    draw_samples,
    empirical_risk,
    gradient_audit,
    risk_gradient,
    run_phases,
    supervised_risk,
    train,
)

from helpers import failure_problem, invariant_problem


# -- sampling ------------------------------------------------------------------


def test_fixed_grid_values():
    s = draw_samples((-1.0, 1.0), 4, "fixed_grid", 0)
    np.testing.assert_allclose(s.interior, [-0.6, -0.2, 0.2, 0.6], atol=1e-15)
    np.testing.assert_array_equal(s.boundary, [-1.0, 1.0])


def test_fixed_grid_collision_shift():
    # n = 3 puts a node exactly on the breakpoint at 0
    s = draw_samples((-1.0, 1.0), 3, "fixed_grid", 0, breakpoints=(0.0,))
    assert s.interior[1] == 1e-12
    assert s.interior[0] == -0.5 and s.interior[2] == 0.5


def test_iid_determinism_and_stream():
    a = draw_samples((-1, 1), 100, "iid_uniform", 42)
    b = draw_samples((-1, 1), 100, "iid_uniform", 42)
    assert np.array_equal(a.interior, b.interior)
    rng = np.random.default_rng(42)
    c = draw_samples((-1, 1), 100, "iid_uniform", rng)
    d = draw_samples((-1, 1), 100, "iid_uniform", rng)
    assert np.array_equal(a.interior, c.interior)  # same stream start
    assert not np.array_equal(c.interior, d.interior)  # stream advanced


def test_iid_never_hits_breakpoints():
    """A breakpoint has sampling probability zero; the shift rule makes that
    a certainty even for adversarial floats."""
    s = draw_samples((-1, 1), 1_000_000, "iid_uniform", 7, breakpoints=(0.0, 0.5))
    assert np.all(s.interior != 0.0)
    assert np.all(s.interior != 0.5)
    near = np.count_nonzero(np.abs(s.interior) < 1e-9)
    assert near <= 5, f"{near} near-misses in a million draws"


def test_sampling_validation():
    with pytest.raises(ValueError, match="sample mode"):
        draw_samples((-1, 1), 10, "sobol", 0)
    with pytest.raises(ValueError, match="n_int"):
        draw_samples((-1, 1), 0, "iid_uniform", 0)
    with pytest.raises(ValueError, match="lo < hi"):
        draw_samples((1, -1), 10, "iid_uniform", 0)


# -- config validation ----------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs,msg",
    [
        (dict(risk_kind="pinn"), "risk_kind"),
        (dict(optimizer="sgd"), "optimizer"),
        (dict(sample_mode="latin"), "sample_mode"),
        (dict(steps=-1), "steps"),
        (dict(n_int=0), "n_int"),
        (dict(lr=-0.1), "lr"),
        (dict(lr_final=0.0), "lr_final"),
        (dict(lr=1e-4, lr_final=1e-3), "lr_final"),
        (dict(beta1=1.0), "beta"),
        (dict(eps=0.0), "eps"),
        (dict(gamma=-1.0), "gamma"),
        (dict(resample_every=-2), "resample_every"),
    ],
)
def test_train_config_validation(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        TrainConfig(**kwargs)


# -- risks ----------------------------------------------------------------------


def test_risk_identity_rm_equals_effective():
    """The two residual-risk derivations are the same functional, exactly."""
    prob = failure_problem()
    rng = np.random.default_rng(3)
    for seed in range(10):
        params = init_xavier((1, 6, 6, 1), seed=seed)
        samples = draw_samples(
            prob.domain, int(rng.integers(5, 200)), "iid_uniform", seed,
            breakpoints=prob.interior_knots,
        )
        r1 = empirical_risk(params, prob, samples, "rm")
        r2 = empirical_risk(params, prob, samples, "effective")
        assert r1 == r2  # bit-identical, not just close


def test_exact_solutions_have_tiny_interior_risk():
    prob = failure_problem()
    ut = solve_modified(prob)
    samples = draw_samples(prob.domain, 500, "iid_uniform", 0, prob.interior_knots)
    risk = empirical_risk(ut, prob, samples)
    assert risk.interior <= 1e-28
    assert risk.boundary <= 1e-28
    # the original solution satisfies the same equation off the interface
    u = solve_original(prob)
    assert empirical_risk(u, prob, samples).interior <= 1e-28


class _Shifted:
    """Jet provider adding a constant to the value channel."""

    def __init__(self, fn, c):
        self.fn, self.c = fn, c

    def jet_batch(self, xs):
        v, p, q = self.fn.jet_batch(xs)
        return v + self.c, p, q


def test_boundary_term_arithmetic():
    """+0.1 at both ends adds exactly gamma * (2/2) * (0.01 + 0.01)."""
    prob = failure_problem()
    ut = solve_modified(prob)
    samples = draw_samples(prob.domain, 100, "iid_uniform", 1, prob.interior_knots)
    base = empirical_risk(ut, prob, samples)
    shifted = empirical_risk(_Shifted(ut, 0.1), prob, samples)
    assert shifted.interior == base.interior
    assert shifted.boundary == pytest.approx(0.02, abs=1e-15)
    doubled = empirical_risk(_Shifted(ut, 0.1), prob, samples, gamma=2.0)
    assert doubled.boundary == pytest.approx(0.04, abs=1e-15)


def test_supervised_risk_zero_at_target_and_h1_at_zero():
    prob = failure_problem()
    u = solve_original(prob)
    samples = draw_samples(prob.domain, 20_000, "fixed_grid", 0, prob.interior_knots)
    at_target = supervised_risk(u, u, samples, prob.domain)
    assert at_target.interior == 0.0
    assert at_target.total <= 1e-30  # boundary picks up rounding in u(+1)
    # the zero network sees the squared H^1 norm of u: 449/270
    zero_net = NetworkParams((1, 2, 1), np.zeros(param_count((1, 2, 1))))
    at_zero = supervised_risk(zero_net, u, samples, prob.domain)
    assert at_zero.interior == pytest.approx(449.0 / 270.0, rel=2e-3)
    assert at_zero.boundary == 0.0


def test_empirical_risk_rejects_supervised_kind():
    prob = failure_problem()
    samples = draw_samples(prob.domain, 10, "iid_uniform", 0)
    with pytest.raises(ValueError, match="rm"):
        empirical_risk(solve_original(prob), prob, samples, kind="supervised")


def test_risk_gradient_matches_empirical_risk_value():
    prob = invariant_problem()
    params = init_xavier((1, 5, 5, 1), seed=2)
    samples = draw_samples(prob.domain, 64, "iid_uniform", 5, prob.interior_knots)
    risk, grad = risk_gradient(params, prob, samples, "rm", 1.0)
    assert risk == empirical_risk(params, prob, samples, "rm", 1.0)
    assert grad.shape == params.flat.shape
    u = solve_original(prob)
    risk_s, grad_s = risk_gradient(
        params, prob, samples, "supervised", 1.0, target=u
    )
    assert risk_s == supervised_risk(params, u, samples, prob.domain, 1.0)
    with pytest.raises(ValueError, match="target"):
        risk_gradient(params, prob, samples, "supervised")


def test_gradient_audit_quick():
    report = gradient_audit(
        failure_problem(), shapes=(((1, 4, 1), "plain"),), seeds=(0, 1), n_samples=8
    )
    assert report["max_rel_error"] <= 1e-6
    assert len(report["cases"]) == 2


def test_gradient_audit_supervised_kind():
    prob = failure_problem()
    report = gradient_audit(
        prob, shapes=(((1, 3, 1), "plain"),), seeds=(0,), n_samples=6,
        kind="supervised", target=solve_original(prob),
    )
    assert report["max_rel_error"] <= 1e-6


# -- the training loop -----------------------------------------------------------


def _tiny_cfg(**kw):
    base = dict(steps=20, n_int=32, seed=3, lr=1e-3)
    base.update(kw)
    return TrainConfig(**base)


def test_zero_steps_returns_initial_params():
    prob = failure_problem()
    params = init_xavier((1, 4, 1), seed=0)
    rec = train(params, prob, _tiny_cfg(steps=0))
    assert np.array_equal(rec.params.flat, params.flat)
    assert rec.risk_total.shape == (1,)
    assert rec.final.total == rec.risk_total[0]


def test_training_is_deterministic():
    prob = failure_problem()
    params = init_xavier((1, 8, 1), seed=1)
    r1 = train(params, prob, _tiny_cfg())
    r2 = train(params, prob, _tiny_cfg())
    assert np.array_equal(r1.risk_total, r2.risk_total)
    assert np.array_equal(r1.params.flat, r2.params.flat)


def test_gd_with_zero_lr_is_a_no_op():
    prob = failure_problem()
    params = init_xavier((1, 4, 1), seed=5)
    rec = train(params, prob, _tiny_cfg(optimizer="gd", lr=0.0, steps=5))
    assert np.array_equal(rec.params.flat, params.flat)
    assert np.all(rec.risk_total == rec.risk_total[0])


def test_risk_actually_decreases():
    prob = failure_problem()
    params = init_xavier((1, 8, 8, 1), seed=0)
    rec = train(params, prob, _tiny_cfg(steps=300, n_int=64, lr=3e-3))
    assert rec.final.total < 0.2 * rec.risk_total[0]


def test_lr_final_equal_to_lr_changes_nothing():
    prob = failure_problem()
    params = init_xavier((1, 4, 1), seed=7)
    r1 = train(params, prob, _tiny_cfg())
    r2 = train(params, prob, _tiny_cfg(lr_final=1e-3))
    assert np.array_equal(r1.params.flat, r2.params.flat)


def test_lr_anneal_changes_trajectory():
    prob = failure_problem()
    params = init_xavier((1, 4, 1), seed=7)
    r1 = train(params, prob, _tiny_cfg(steps=40))
    r2 = train(params, prob, _tiny_cfg(steps=40, lr_final=1e-5))
    assert not np.array_equal(r1.params.flat, r2.params.flat)


def test_divergence_aborts_with_step_index():
    prob = failure_problem()
    params = init_xavier((1, 6, 1), seed=0)
    with np.errstate(all="ignore"), pytest.raises(NumericalAbort) as exc:
        train(params, prob, _tiny_cfg(optimizer="gd", lr=1e308, steps=50))
    assert exc.value.step > 0


def test_resampling_counts_and_perturbs():
    prob = failure_problem()
    params = init_xavier((1, 6, 1), seed=2)
    fixed = train(params, prob, _tiny_cfg(steps=25))
    moving = train(params, prob, _tiny_cfg(steps=25, resample_every=10))
    assert fixed.n_resamples == 0
    assert moving.n_resamples == 2  # at steps 10 and 20
    assert not np.array_equal(fixed.risk_total, moving.risk_total)


def test_supervised_training_requires_target():
    prob = failure_problem()
    params = init_xavier((1, 4, 1), seed=0)
    with pytest.raises(ValueError, match="target"):
        train(params, prob, _tiny_cfg(risk_kind="supervised"))


def test_run_phases_chains_parameters():
    prob = failure_problem()
    params = init_xavier((1, 6, 1), seed=4)
    u = solve_original(prob)
    cfg1 = _tiny_cfg(risk_kind="supervised", steps=15, seed=4)
    cfg2 = _tiny_cfg(risk_kind="rm", steps=10, seed=5)
    recs = run_phases(params, prob, [cfg1, cfg2], target=u)
    assert len(recs) == 2
    # phase 2 starts exactly where phase 1 ended
    samples = draw_samples(prob.domain, cfg2.n_int, cfg2.sample_mode, cfg2.seed,
                           prob.interior_knots)
    restart = empirical_risk(recs[0].params, prob, samples, "rm", cfg2.gamma)
    assert recs[1].risk_total[0] == restart.total


def test_risk_trend_improves_on_failure_example():
    """Desk-scale echo of the headline run: median risk over the last tenth
    of the steps is below the median over the first tenth."""
    prob = failure_problem()
    params = init_xavier((1, 16, 16, 1), seed=0)
    cfg = TrainConfig(steps=800, n_int=200, seed=0, lr=3e-3)
    rec = train(params, prob, cfg)
    tenth = (cfg.steps + 1) // 10
    first = np.median(rec.risk_total[:tenth])
    last = np.median(rec.risk_total[-tenth:])
    assert last < first


def test_run_record_final_property():
    prob = invariant_problem()
    params = init_xavier((1, 4, 1), seed=9)
    rec = train(params, prob, _tiny_cfg(steps=3))
    assert rec.final.total == rec.risk_total[-1]
    assert rec.final.interior == rec.risk_interior[-1]
    assert rec.final.boundary == rec.risk_boundary[-1]
