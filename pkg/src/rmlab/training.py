"""Sample draws, empirical risks, and the training loop.

The residual risk of a candidate w on a fixed sample set is

    R_S(w) = (|Omega|/n) sum_i r(x_i)^2  +  gamma (2/n_bd) sum_b w(x_b)^2,
    r(x)   = A(x) w''(x) + dA(x) w'(x) + f(x),

with dA the absolutely continuous part of A' (the interfaces carry no
samples almost surely, so the Dirac part of A' never shows up).  The risk
kinds "rm" and "effective" label the two derivations of that same residual
-- plugging w into the divergence-form equation and sampling away from the
jumps, or sampling the non-divergence equation -- and evaluate to the same
number by construction; "supervised" replaces the residual by direct H^1
mismatch against a known target.

Training minimizes a risk with Adam or plain gradient descent on the flat
parameter vector, recording the risk trajectory; a non-finite risk aborts
with the offending step index.
"""

import math
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .network import backprop_jet, forward_jet_batch

__all__ = [
    "SampleSet",
    "TrainConfig",
    "RunRecord",
    "RiskValues",
    "NumericalAbort",
    "draw_samples",
    "empirical_risk",
    "supervised_risk",
    "risk_gradient",
    "train",
    "run_phases",
    "gradient_audit",
]

RISK_KINDS = ("rm", "effective", "supervised")
SAMPLE_MODES = ("iid_uniform", "fixed_grid")
OPTIMIZERS = ("adam", "gd")
COLLISION_SHIFT = 1e-12


class NumericalAbort(RuntimeError):
    """Raised when the training risk stops being finite."""

    def __init__(self, step, value):
        super().__init__(f"non-finite risk value {value!r} at step {step}")
        self.step = step
        self.value = value


class RiskValues(NamedTuple):
    total: float
    interior: float
    boundary: float


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Interior collocation points plus the two boundary points."""

    interior: np.ndarray
    boundary: np.ndarray
    mode: str
    seed: object = None

    def __post_init__(self):
        self.interior.setflags(write=False)
        self.boundary.setflags(write=False)


def draw_samples(domain, n_int, mode="iid_uniform", seed=None, breakpoints=()):
    """Draw interior sample points on (lo, hi); boundary is always {lo, hi}.

    mode "iid_uniform" draws n_int points uniformly (reproducible from
    seed); "fixed_grid" places them evenly in the interior at
    lo + i (hi - lo)/(n_int + 1), i = 1..n_int.  Any sample that collides
    with a breakpoint in exact floating-point equality is shifted by
    +1e-12: the interfaces form a set of measure zero, and the risks are
    only defined off them.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise ValueError("domain must satisfy lo < hi")
    n_int = int(n_int)
    if n_int < 1:
        raise ValueError("n_int must be >= 1")
    if mode == "iid_uniform":
        rng = np.random.default_rng(seed)
        xs = rng.uniform(lo, hi, n_int)
    elif mode == "fixed_grid":
        xs = lo + np.arange(1, n_int + 1) * ((hi - lo) / (n_int + 1))
    else:
        raise ValueError(f"unknown sample mode {mode!r}")
    for b in np.asarray(breakpoints, dtype=float).ravel():
        xs[xs == b] += COLLISION_SHIFT
    return SampleSet(
        interior=xs, boundary=np.array([lo, hi]), mode=mode, seed=seed
    )


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters for one training run (one phase)."""

    risk_kind: str = "rm"
    steps: int = 1000
    optimizer: str = "adam"
    lr: float = 1e-3
    lr_final: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    gamma: float = 1.0
    n_int: int = 1000
    sample_mode: str = "iid_uniform"
    seed: int = 0
    resample_every: int = 0

    def __post_init__(self):
        if self.risk_kind not in RISK_KINDS:
            raise ValueError(f"risk_kind must be one of {RISK_KINDS}, got {self.risk_kind!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.sample_mode not in SAMPLE_MODES:
            raise ValueError(f"sample_mode must be one of {SAMPLE_MODES}, got {self.sample_mode!r}")
        if int(self.steps) < 0:
            raise ValueError("steps must be >= 0")
        if int(self.n_int) < 1:
            raise ValueError("n_int must be >= 1")
        if not (np.isfinite(self.lr) and self.lr >= 0.0):
            raise ValueError("lr must be finite and >= 0")
        if self.lr_final is not None and not (0.0 < self.lr_final <= self.lr):
            raise ValueError("lr_final must satisfy 0 < lr_final <= lr")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1/beta2 must lie in [0, 1)")
        if not self.eps > 0.0:
            raise ValueError("eps must be > 0")
        if not (np.isfinite(self.gamma) and self.gamma >= 0.0):
            raise ValueError("gamma must be finite and >= 0")
        if int(self.resample_every) < 0:
            raise ValueError("resample_every must be >= 0")


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Risk trajectory and final parameters of one training run.

    risk_* have length steps + 1: entry k is the risk at the parameters
    before update k, the last entry is the final risk.
    """

    config: TrainConfig
    params: object
    risk_total: np.ndarray
    risk_interior: np.ndarray
    risk_boundary: np.ndarray
    wall_time: float
    n_resamples: int = 0

    @property
    def final(self):
        return RiskValues(
            float(self.risk_total[-1]),
            float(self.risk_interior[-1]),
            float(self.risk_boundary[-1]),
        )


def _interior_weight(domain, n):
    return (domain[1] - domain[0]) / n


def _split_jets(fn, samples):
    xs = np.concatenate((samples.interior, samples.boundary))
    v, p, q = fn.jet_batch(xs)
    n = samples.interior.size
    return (v[:n], p[:n], q[:n]), v[n:]


def empirical_risk(fn, problem, samples, kind="rm", gamma=1.0):
    """Residual risk of fn on the given samples.

    kind "rm" and "effective" are two labels for the same functional (see
    the module docstring); both are accepted so callers can state which
    derivation they mean.  fn is anything with jet_batch(xs) -> (w, w', w'').
    """
    if kind not in ("rm", "effective"):
        raise ValueError(f"kind must be 'rm' or 'effective', got {kind!r}")
    (vi, pi, qi), vb = _split_jets(fn, samples)
    xi = samples.interior
    r = problem.a_value(xi) * qi + problem.da_ac(xi) * pi + problem.f_value(xi)
    interior = _interior_weight(problem.domain, xi.size) * float(np.sum(r * r))
    boundary = gamma * (2.0 / samples.boundary.size) * float(np.sum(vb * vb))
    return RiskValues(interior + boundary, interior, boundary)


def supervised_risk(fn, target, samples, domain, gamma=1.0):
    """H^1-type mismatch risk against a known target function.

    (|Omega|/n) sum [(w - u)^2 + (w' - u')^2] over the interior samples plus
    the same boundary penalty as the residual risks.
    """
    (vi, pi, _), vb = _split_jets(fn, samples)
    xi = samples.interior
    tv = target.evaluate(xi, 0)
    td = target.evaluate(xi, 1)
    interior = _interior_weight(domain, xi.size) * float(
        np.sum((vi - tv) ** 2 + (pi - td) ** 2)
    )
    boundary = gamma * (2.0 / samples.boundary.size) * float(np.sum(vb * vb))
    return RiskValues(interior + boundary, interior, boundary)


def risk_gradient(params, problem, samples, kind="rm", gamma=1.0, target=None,
                  flat=None):
    """Risk and its flat-parameter gradient in one forward/backward pass.

    The reverse pass is seeded per sample: interior sample i contributes
    2 (|Omega|/n) r_i * (A(x_i), dA(x_i)) on the second-/first-derivative
    channels (or the plain H^1 mismatch seeds in supervised mode), boundary
    point b contributes 2 gamma (2/n_bd) w(x_b) on the value channel.
    """
    xs = np.concatenate((samples.interior, samples.boundary))
    n = samples.interior.size
    v, p, q, tape = forward_jet_batch(params, xs, flat=flat, keep_tape=True)
    vi, pi = v[:n], p[:n]
    vb = v[n:]
    wi = _interior_weight(problem.domain, n)
    wb = gamma * (2.0 / samples.boundary.size)
    seed_v = np.zeros_like(v)
    seed_p = np.zeros_like(v)
    seed_q = np.zeros_like(v)
    if kind in ("rm", "effective"):
        xi = samples.interior
        a = problem.a_value(xi)
        da = problem.da_ac(xi)
        r = a * q[:n] + da * pi + problem.f_value(xi)
        interior = wi * float(np.sum(r * r))
        seed_p[:n] = 2.0 * wi * r * da
        seed_q[:n] = 2.0 * wi * r * a
    elif kind == "supervised":
        if target is None:
            raise ValueError("supervised risk needs a target function")
        tv = target.evaluate(samples.interior, 0)
        td = target.evaluate(samples.interior, 1)
        interior = wi * float(np.sum((vi - tv) ** 2 + (pi - td) ** 2))
        seed_v[:n] = 2.0 * wi * (vi - tv)
        seed_p[:n] = 2.0 * wi * (pi - td)
    else:
        raise ValueError(f"unknown risk kind {kind!r}")
    boundary = wb * float(np.sum(vb * vb))
    seed_v[n:] = 2.0 * wb * vb
    grad = backprop_jet(params, tape, seed_v, seed_p, seed_q, flat=flat)
    return RiskValues(interior + boundary, interior, boundary), grad


def train(params0, problem, config, target=None):
    """Minimize the configured risk from params0; returns a RunRecord.

    Samples are drawn once from config.seed (and redrawn every
    resample_every steps, if nonzero, from the same deterministic stream).
    Identical inputs give bit-identical trajectories.  A non-finite risk
    raises NumericalAbort carrying the step index.
    """
    if config.risk_kind == "supervised" and target is None:
        raise ValueError("supervised training needs a target function")
    t0 = time.perf_counter()
    steps = int(config.steps)
    rng = np.random.default_rng(config.seed)
    breakpoints = problem.interior_knots

    def fresh_samples():
        return draw_samples(
            problem.domain, config.n_int, config.sample_mode, rng, breakpoints
        )

    samples = fresh_samples()
    n_resamples = 0
    flat = params0.flat.copy()
    m = np.zeros_like(flat)
    vel = np.zeros_like(flat)
    risk_t = np.empty(steps + 1)
    risk_i = np.empty(steps + 1)
    risk_b = np.empty(steps + 1)
    for step in range(steps + 1):
        if (
            step > 0
            and step < steps
            and config.resample_every > 0
            and step % config.resample_every == 0
        ):
            samples = fresh_samples()
            n_resamples += 1
        risk, grad = risk_gradient(
            params0, problem, samples, config.risk_kind, config.gamma, target,
            flat=flat,
        )
        risk_t[step], risk_i[step], risk_b[step] = risk
        if not np.isfinite(risk.total):
            raise NumericalAbort(step, risk.total)
        if step == steps:
            break
        if config.lr_final is None:
            lr = config.lr
        else:
            # cosine anneal lr -> lr_final across the run
            frac = step / max(steps - 1, 1)
            lr = config.lr_final + 0.5 * (config.lr - config.lr_final) * (
                1.0 + math.cos(math.pi * frac)
            )
        if config.optimizer == "adam":
            tcount = step + 1
            m = config.beta1 * m + (1.0 - config.beta1) * grad
            vel = config.beta2 * vel + (1.0 - config.beta2) * grad * grad
            mhat = m / (1.0 - config.beta1**tcount)
            vhat = vel / (1.0 - config.beta2**tcount)
            flat = flat - lr * mhat / (np.sqrt(vhat) + config.eps)
        else:  # gd
            flat = flat - lr * grad
    return RunRecord(
        config=config,
        params=params0.with_flat(flat),
        risk_total=risk_t,
        risk_interior=risk_i,
        risk_boundary=risk_b,
        wall_time=time.perf_counter() - t0,
        n_resamples=n_resamples,
    )


def run_phases(params0, problem, phase_configs, target=None):
    """Run several training phases back to back, chaining parameters."""
    records = []
    params = params0
    for cfg in phase_configs:
        rec = train(params, problem, cfg, target=target)
        records.append(rec)
        params = rec.params
    return records


DEFAULT_AUDIT_SHAPES = (
    ((1, 2, 1), "plain"),
    ((1, 4, 4, 1), "plain"),
    ((1, 8, 8, 8, 1), "plain"),
    ((1, 5, 5, 5, 1), "resnet"),
)


def gradient_audit(problem, shapes=DEFAULT_AUDIT_SHAPES, seeds=(0, 1, 2, 3, 4),
                   n_samples=16, gamma=1.0, h=1e-6, kind="rm", target=None):
    """Compare analytic risk gradients against central finite differences.

    For every (widths, architecture) x seed case: initialize, draw
    n_samples interior points, and report the relative sup-norm
    disagreement  max|g - g_fd| / max(1, max|g_fd|).  Returns a dict with
    the worst case and the per-case list.
    """
    from .network import init_xavier  # local import keeps module load light

    cases = []
    worst = 0.0
    for widths, arch in shapes:
        for seed in seeds:
            params = init_xavier(widths, seed=seed, architecture=arch)
            samples = draw_samples(
                problem.domain, n_samples, "iid_uniform", 1000 + seed,
                problem.interior_knots,
            )
            _, grad = risk_gradient(
                params, problem, samples, kind=kind, gamma=gamma, target=target
            )

            def risk_of(flat):
                if kind in ("rm", "effective"):
                    return empirical_risk(
                        params.with_flat(flat), problem, samples, kind, gamma
                    ).total
                return supervised_risk(
                    params.with_flat(flat), target, samples, problem.domain, gamma
                ).total

            fd = np.zeros_like(grad)
            for i in range(grad.size):
                bump = np.zeros_like(grad)
                bump[i] = h
                fd[i] = (risk_of(params.flat + bump) - risk_of(params.flat - bump)) / (
                    2.0 * h
                )
            rel = float(np.max(np.abs(grad - fd)) / max(1.0, np.max(np.abs(fd))))
            worst = max(worst, rel)
            cases.append(
                {
                    "widths": list(widths),
                    "architecture": arch,
                    "seed": seed,
                    "n_params": grad.size,
                    "rel_error": rel,
                }
            )
    return {"max_rel_error": worst, "tolerance_hint": 1e-5, "cases": cases}
