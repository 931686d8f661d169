"""Quadrature, Sobolev norms, deviation reports and population risks.

All routines consume "jet providers": objects with jet_batch(xs) returning
(value, first, second derivative) arrays -- piecewise polynomials, solved
boundary-value functions and networks all satisfy the protocol.

Integrals use composite Gauss-Legendre refined between the knots, so the
integrand is smooth inside every cell and polynomials of moderate degree
integrate exactly.  The sup norm is taken over a dense grid plus all knots;
for functions carrying an exact piecewise-polynomial representation the
pieces' interior stationary points are probed as well, which makes the
reported maximum exact for them instead of O(grid spacing^2) accurate.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .piecewise import PiecewiseFunction1D, pw_sub
from .training import RiskValues

__all__ = [
    "QuadratureRule",
    "norm",
    "difference",
    "DeviationReport",
    "deviation_report",
    "population_risk",
]

NORM_KINDS = ("linf", "l2", "h1")


class QuadratureRule:
    """Composite Gauss-Legendre rule refined between knots.

    Each knot interval is split into cells_per_interval equal cells carrying
    a Gauss rule of the given order; nodes are strictly interior to their
    cells, so they never hit a knot.  Exact for piecewise polynomials of
    degree <= 2*order - 1 on the knot partition.
    """

    def __init__(self, knots, order=16, cells_per_interval=64):
        knots = np.unique(np.asarray(knots, dtype=float))
        if knots.size < 2:
            raise ValueError("need at least two distinct knots")
        if not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        order = int(order)
        cells = int(cells_per_interval)
        if order < 1 or cells < 1:
            raise ValueError("order and cells_per_interval must be >= 1")
        gx, gw = np.polynomial.legendre.leggauss(order)
        nodes, weights = [], []
        for a, b in zip(knots[:-1], knots[1:]):
            edges = np.linspace(a, b, cells + 1)
            mid = 0.5 * (edges[:-1] + edges[1:])
            half = 0.5 * (edges[1:] - edges[:-1])
            nodes.append((mid[:, None] + half[:, None] * gx[None, :]).ravel())
            weights.append((half[:, None] * np.broadcast_to(gw, (cells, order))).ravel())
        self.knots = knots
        self.order = order
        self.cells_per_interval = cells
        self.nodes = np.concatenate(nodes)
        self.weights = np.concatenate(weights)
        self.knots.setflags(write=False)
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def for_problem(cls, problem, order=16, cells_per_interval=64):
        return cls(problem.knots, order, cells_per_interval)

    @property
    def domain(self):
        return (float(self.knots[0]), float(self.knots[-1]))

    def integrate(self, values):
        """Integral of a callable or of values given on self.nodes."""
        if callable(values):
            values = values(self.nodes)
        values = np.asarray(values, dtype=float)
        if values.shape != self.nodes.shape:
            raise ValueError("values must match the rule's nodes")
        if not np.all(np.isfinite(values)):
            bad = self.nodes[~np.isfinite(values)][0]
            raise ValueError(f"non-finite integrand value at node x={bad!r}")
        return float(np.dot(self.weights, values))


def _pw_payload(fn):
    if isinstance(fn, PiecewiseFunction1D):
        return fn
    payload = getattr(fn, "piecewise", None)
    return payload if isinstance(payload, PiecewiseFunction1D) else None


def _stationary_points(pf):
    """Interior stationary points of each polynomial piece of pf."""
    pts = []
    knots = pf.knots
    for i, c in enumerate(pf.pieces):
        der = npoly.polyder(c)
        if np.count_nonzero(der) == 0 or der.size == 0:
            continue
        for r in npoly.polyroots(der):
            if abs(r.imag) < 1e-12 and knots[i] < r.real < knots[i + 1]:
                pts.append(float(r.real))
    return pts


def _check_finite(vals, xs, what):
    if not np.all(np.isfinite(vals)):
        bad = np.asarray(xs)[~np.isfinite(vals)][0]
        raise ValueError(f"non-finite {what} at node x={bad!r}")


def norm(fn, which, rule, grid_points=10001):
    """L-infinity, L2 or H1 norm of a jet provider.

    which: "linf" uses a grid of grid_points plus all rule knots (plus exact
    stationary points when fn is backed by a piecewise polynomial); "l2" and
    "h1" integrate with the given QuadratureRule.  The H1 norm is the full
    one, sqrt(||f||_L2^2 + ||f'||_L2^2).
    """
    which = str(which).lower()
    if which not in NORM_KINDS:
        raise ValueError(f"which must be one of {NORM_KINDS}, got {which!r}")
    lo, hi = rule.domain
    if which == "linf":
        probes = [np.linspace(lo, hi, int(grid_points)), rule.knots]
        payload = _pw_payload(fn)
        if payload is not None:
            probes.append(np.asarray(_stationary_points(payload)))
        xs = np.unique(np.concatenate([p for p in probes if p.size]))
        vals = fn.jet_batch(xs)[0]
        _check_finite(vals, xs, "evaluation")
        return float(np.max(np.abs(vals)))
    v, d1, _ = fn.jet_batch(rule.nodes)
    _check_finite(v, rule.nodes, "evaluation")
    total = rule.integrate(v * v)
    if which == "h1":
        _check_finite(d1, rule.nodes, "derivative")
        total += rule.integrate(d1 * d1)
    return float(np.sqrt(max(total, 0.0)))


class _JetDifference:
    """Lazy difference of two jet providers (channel-wise subtraction)."""

    def __init__(self, f, g):
        self.f = f
        self.g = g
        pf, pg = _pw_payload(f), _pw_payload(g)
        self.piecewise = pw_sub(pf, pg) if (pf is not None and pg is not None) else None

    def jet_batch(self, xs):
        fv, fp, fq = self.f.jet_batch(xs)
        gv, gp, gq = self.g.jet_batch(xs)
        return fv - gv, fp - gp, fq - gq


def difference(f, g):
    """f - g as a jet provider; exact piecewise payload when both carry one."""
    return _JetDifference(f, g)


@dataclass(frozen=True)
class DeviationReport:
    """Norms of named functions and of all their pairwise differences."""

    names: tuple
    norms: dict      # name -> {which: value}
    distances: dict  # (name_a, name_b) sorted tuple -> {which: value}

    def norm_of(self, name, which):
        return self.norms[name][which]

    def distance(self, a, b, which):
        return self.distances[tuple(sorted((a, b)))][which]

    def relative(self, a, b, which, normalizer):
        """Distance of a and b divided by the norm of `normalizer`."""
        return self.distance(a, b, which) / self.norms[normalizer][which]

    def rows(self):
        """Generic table rows: absolute and relative deviations per pair."""
        out = []
        for a, b in self.distances:
            out.append((f"|{a} - {b}|", [self.distance(a, b, w) for w in NORM_KINDS]))
            for ref in (b, a):
                out.append(
                    (
                        f"|{a} - {b}| / |{ref}|",
                        [self.relative(a, b, w, ref) for w in NORM_KINDS],
                    )
                )
        return out

    def to_markdown(self):
        lines = ["| quantity | Linf | L2 | H1 |", "| --- | --- | --- | --- |"]
        for label, vals in self.rows():
            cells = " | ".join(f"{v:.6g}" for v in vals)
            lines.append(f"| {label} | {cells} |")
        return "\n".join(lines) + "\n"

    def to_csv_rows(self):
        out = [("quantity", "linf", "l2", "h1")]
        for label, vals in self.rows():
            out.append((label,) + tuple(f"{v:.17g}" for v in vals))
        return out


def deviation_report(named_fns, rule, grid_points=10001):
    """Norms and pairwise deviations of a dict name -> jet provider.

    Distances are symmetric by construction; relative deviations are
    available against either member of a pair.
    """
    names = tuple(named_fns)
    norms = {
        name: {w: norm(fn, w, rule, grid_points) for w in NORM_KINDS}
        for name, fn in named_fns.items()
    }
    distances = {}
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            diff = difference(named_fns[a], named_fns[b])
            key = tuple(sorted((a, b)))
            distances[key] = {w: norm(diff, w, rule, grid_points) for w in NORM_KINDS}
    return DeviationReport(names=names, norms=norms, distances=distances)


def population_risk(fn, problem, kind="modified", gamma=1.0, rule=None):
    """Quadrature version of the residual risk (the n -> infinity limit).

    kind "original" and "modified" select which equation the residual is
    read from; off the jump set the two coincide pointwise, and quadrature
    nodes never sit on a knot, so both kinds integrate the same function:

        integral of (A w'' + dA w' + f)^2  +  gamma * sum of w(boundary)^2.
    """
    if kind not in ("original", "modified"):
        raise ValueError(f"kind must be 'original' or 'modified', got {kind!r}")
    if rule is None:
        rule = QuadratureRule.for_problem(problem)
    xs = rule.nodes
    v, d1, d2 = fn.jet_batch(xs)
    for arr, what in ((v, "value"), (d1, "derivative"), (d2, "second derivative")):
        _check_finite(arr, xs, what)
    r = problem.a_value(xs) * d2 + problem.da_ac(xs) * d1 + problem.f_value(xs)
    interior = rule.integrate(r * r)
    lo, hi = problem.domain
    vb = fn.jet_batch(np.array([lo, hi]))[0]
    boundary = gamma * float(np.sum(vb * vb))
    return RiskValues(interior + boundary, interior, boundary)
