"""Exact reference solutions for the two-point interface problem.

Two boundary-value problems on (lo, hi) with homogeneous Dirichlet data are
solved here for the same data (A, f), A = chi * a_bar:

* original (divergence form):   -(A u')' = f        -- u in H^1, flux A u'
  continuous across the jumps of chi;
* modified (non-divergence):    -A w'' - (chi a_bar') w' = f  -- w in H^2,
  so w' itself is continuous.

Both solutions satisfy the pointwise equation -A v'' - (chi a_bar') v' = f
away from the jump set; they differ exactly when some jump sees a nonzero
slope of the modified solution.  That defect is a finite combination of
Dirac masses (the atoms of the residual transform), measured here in the
dual norm of H^1_0 via a Green's function.
"""

import math

import numpy as np
from numpy.polynomial import polynomial as npoly

from .piecewise import CoefficientDecomposition, PiecewiseFunction1D, evaluate, jump_set

__all__ = [
    "BVPProblem",
    "SolutionFunction",
    "DiracCombination",
    "KernelReport",
    "solve_original",
    "solve_modified",
    "rm_transform",
    "kernel_membership",
    "h_minus_one_norm",
]


class BVPProblem:
    """Data (A = chi * a_bar, f) for the interface problem on one interval.

    The knot list merges the breakpoints of chi and of f, so every
    subinterval between consecutive knots has polynomial A and f.
    """

    def __init__(self, decomp, f):
        if not isinstance(decomp, CoefficientDecomposition):
            raise ValueError("decomp must be a CoefficientDecomposition")
        if not isinstance(f, PiecewiseFunction1D):
            raise ValueError("f must be a PiecewiseFunction1D")
        if decomp.domain != f.domain:
            raise ValueError(
                f"coefficient domain {decomp.domain} != source domain {f.domain}"
            )
        self.decomp = decomp
        self.f = f
        self.knots = np.unique(np.concatenate((decomp.chi.knots, f.knots)))
        self.knots.setflags(write=False)

    @property
    def domain(self):
        return self.decomp.domain

    @property
    def domain_lo(self):
        return self.decomp.domain_lo

    @property
    def domain_hi(self):
        return self.decomp.domain_hi

    @property
    def interior_knots(self):
        return self.knots[1:-1]

    def a_value(self, x):
        return self.decomp.a_value(x)

    def da_ac(self, x):
        return self.decomp.da_ac(x)

    def f_value(self, x):
        return evaluate(self.f, x)

    def aligned_pieces(self):
        """Per-subinterval (A, dA, f) coefficient arrays on the merged knots."""
        bp = self.interior_knots
        a_al = self.decomp.a_piecewise().with_breakpoints(bp)
        da_al = self.decomp.da_ac_piecewise().with_breakpoints(bp)
        f_al = self.f.with_breakpoints(bp)
        return a_al, da_al, f_al

    def __repr__(self):
        return f"BVPProblem(domain={self.domain}, knots={self.knots.tolist()})"


def _hermite(gx, gv, gd_right, gd_left, xs, order):
    """Cubic Hermite interpolation (order 0 or 1) on a sorted node grid.

    Node derivatives are kept one-sided: ``gd_right`` holds limits from the
    right (used at a cell's left end) and ``gd_left`` limits from the left
    (used at a cell's right end); they differ only at knots where the
    interpolated function has a kink.
    """
    idx = np.clip(np.searchsorted(gx, xs, side="right") - 1, 0, gx.size - 2)
    x0, x1 = gx[idx], gx[idx + 1]
    h = x1 - x0
    s = (xs - x0) / h
    v0, v1, d0, d1 = gv[idx], gv[idx + 1], gd_right[idx], gd_left[idx + 1]
    if order == 0:
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return v0 * h00 + d0 * h * h10 + v1 * h01 + d1 * h * h11
    g00 = 6.0 * s * (s - 1.0)
    g10 = 3.0 * s * s - 4.0 * s + 1.0
    g01 = -g00
    g11 = 3.0 * s * s - 2.0 * s
    return (v0 * g00 + d0 * h * g10 + v1 * g01 + d1 * h * g11) / h


class SolutionFunction:
    """A solved boundary-value function with derivatives up to order 2.

    provenance "closed_form": backed by an exact piecewise polynomial.
    provenance "ode": backed by a dense node grid (x, value, derivative)
    with cubic Hermite interpolation; the second derivative (and, for the
    original problem, the first) is recovered from the differential
    equation itself rather than by differencing.
    """

    def __init__(self, kind, provenance, problem, piecewise=None, grid=None,
                 deriv_exact=None, grid_deriv_left=None):
        if kind not in ("original", "modified"):
            raise ValueError(f"unknown solution kind {kind!r}")
        if provenance not in ("closed_form", "ode"):
            raise ValueError(f"unknown provenance {provenance!r}")
        self.kind = kind
        self.provenance = provenance
        self.problem = problem
        self.piecewise = piecewise
        self._deriv_exact = deriv_exact
        if grid is not None:
            gx, gv, gd = (np.asarray(a, dtype=float) for a in grid)
            gdl = gd if grid_deriv_left is None else np.asarray(grid_deriv_left, float)
            for a in (gx, gv, gd, gdl):
                a.setflags(write=False)
            self.grid = (gx, gv, gd)
            self._grid_deriv_left = gdl
        else:
            self.grid = None
        if (self.piecewise is None) == (self.grid is None):
            raise ValueError("exactly one of piecewise/grid must back the solution")

    def evaluate(self, x, order=0):
        """Value or derivative at x (scalar or array); right limits at knots."""
        if self.piecewise is not None:
            return evaluate(self.piecewise, x, order)
        if order not in (0, 1, 2):
            raise ValueError("derivative order must be 0, 1 or 2")
        xs = np.asarray(x, dtype=float)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        lo, hi = self.problem.domain
        bad = (xs < lo) | (xs > hi) | ~np.isfinite(xs)
        if np.any(bad):
            raise ValueError(f"x={xs[bad][0]!r} outside domain [{lo}, {hi}]")
        gx, gv, gd = self.grid
        if order == 0:
            out = _hermite(gx, gv, gd, self._grid_deriv_left, xs, 0)
        elif order == 1:
            if self._deriv_exact is not None:
                out = self._deriv_exact(xs)
            else:
                out = _hermite(gx, gv, gd, self._grid_deriv_left, xs, 1)
        else:
            # both problems satisfy -A v'' - dA v' = f off the knots
            d1 = self.evaluate(xs, 1)
            p = self.problem
            out = -(p.f_value(xs) + p.da_ac(xs) * d1) / p.a_value(xs)
        return float(out[0]) if scalar else out

    def __call__(self, x, order=0):
        return self.evaluate(x, order)

    def jet_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return self.evaluate(xs, 0), self.evaluate(xs, 1), self.evaluate(xs, 2)

    def __repr__(self):
        return f"SolutionFunction(kind={self.kind!r}, provenance={self.provenance!r})"


def _require_piecewise_constant(problem, caller):
    if not problem.decomp.is_piecewise_constant():
        raise ValueError(
            f"{caller}: closed form requires piecewise-constant A "
            "(constant a_bar); use the ODE path instead"
        )


def _gauss_cells(knots, cells_per_interval=64, order=16):
    """Composite Gauss-Legendre nodes/weights refined between knots."""
    gx, gw = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(knots[:-1], knots[1:]):
        edges = np.linspace(a, b, cells_per_interval + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        nodes.append((mid[:, None] + half[:, None] * gx[None, :]).ravel())
        weights.append((half[:, None] * gw[None, :]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def solve_original(problem, method="auto"):
    """Solve the divergence-form problem -(A u')' = f, u(lo) = u(hi) = 0.

    Integrating once gives the flux A u' = c - F with F' = f, so

        u(x) = c * int_lo^x 1/A  -  int_lo^x F/A,

    and c is fixed by u(hi) = 0.  With piecewise-constant A everything is
    exact polynomial arithmetic ("closed_form").  Otherwise ("grid") the two
    integrals are accumulated on a dense composite Gauss grid; the
    derivative formula u' = (c - F)/A stays exact either way, so the flux is
    globally continuous by construction.
    """
    if method == "auto":
        method = "closed_form" if problem.decomp.is_piecewise_constant() else "grid"
    if method not in ("closed_form", "grid"):
        raise ValueError(f"unknown method {method!r} for solve_original")

    domain = problem.domain
    bp = problem.interior_knots
    f_al = problem.f.with_breakpoints(bp)
    big_f = f_al.antiderivative(0.0)  # F with F(lo) = 0

    if method == "closed_form":
        _require_piecewise_constant(problem, "solve_original")
        chi_al = problem.decomp.chi.with_breakpoints(bp)
        abar0 = float(problem.decomp.a_bar[0])
        a_vals = [float(c[0]) * abar0 for c in chi_al.pieces]
        g_int = PiecewiseFunction1D(
            domain, bp, [[1.0 / a] for a in a_vals]
        ).antiderivative(0.0)
        h_int = PiecewiseFunction1D(
            domain, bp, [c / a for c, a in zip(big_f.pieces, a_vals)]
        ).antiderivative(0.0)
        c = evaluate(h_int, domain[1]) / evaluate(g_int, domain[1])
        u_pieces = [
            npoly.polysub(c * g, h) for g, h in zip(g_int.pieces, h_int.pieces)
        ]
        u_pw = PiecewiseFunction1D(domain, bp, u_pieces)
        return SolutionFunction("original", "closed_form", problem, piecewise=u_pw)

    # dense-grid path: cumulative Gauss integration of (c - F)/A
    nodes, weights = _gauss_cells(problem.knots)
    a_nodes = problem.a_value(nodes)
    inv_a = weights / a_nodes
    c = float(np.dot(inv_a, evaluate(big_f, nodes))) / float(np.sum(inv_a))

    def du(xs):
        return (c - evaluate(big_f, xs)) / problem.a_value(xs)

    cells_per = 64
    gx_nodes = [problem.domain_lo]
    for a, b in zip(problem.knots[:-1], problem.knots[1:]):
        gx_nodes.extend(np.linspace(a, b, cells_per + 1)[1:])
    gx = np.asarray(gx_nodes)
    # integrate u' over each little cell with a local Gauss rule
    qx, qw = np.polynomial.legendre.leggauss(16)
    mid = 0.5 * (gx[:-1] + gx[1:])
    half = 0.5 * (gx[1:] - gx[:-1])
    cell_nodes = mid[:, None] + half[:, None] * qx[None, :]
    cell_int = (du(cell_nodes.ravel()).reshape(cell_nodes.shape) * qw[None, :]).sum(
        axis=1
    ) * half
    gv = np.concatenate(([0.0], np.cumsum(cell_int)))
    gd = du(gx)
    # the flux derivative jumps where A does: at those knot nodes keep the
    # left limit separately so Hermite cells on the left stay consistent
    gd_left = gd.copy()
    a_pw = problem.decomp.a_piecewise()
    for m, knot in enumerate(a_pw.breakpoints):
        j = int(np.searchsorted(gx, knot))
        if j < gx.size and gx[j] == knot:
            a_left = npoly.polyval(knot, a_pw.pieces[m])
            gd_left[j] = (c - evaluate(big_f, knot)) / a_left
    return SolutionFunction(
        "original", "ode", problem, grid=(gx, gv, gd), deriv_exact=du,
        grid_deriv_left=gd_left,
    )


def solve_modified(problem, method="auto", steps_per_interval=256):
    """Solve the non-divergence problem -A w'' - (chi a_bar') w' = f, w = 0 at both ends.

    closed_form (piecewise-constant A): on each subinterval w'' = -f/A is a
    polynomial; double antiderivatives are chained with continuous value and
    slope across the knots (the solution is C^1 by construction), and the
    one free slope at lo is fixed by w(hi) = 0 -- the dependence on that
    slope is affine, so this is a single linear solve.

    ode: linear shooting with classic fixed-step RK4.  A particular
    trajectory (zero initial data, full right-hand side) and a homogeneous
    one (unit initial slope, f dropped) are integrated jointly; their
    combination enforcing w(hi) = 0 is returned on the step grid.  Steps are
    aligned to the knots so no stage ever crosses a coefficient breakpoint;
    fewer than 2 steps per subinterval is a configuration error.
    """
    if method == "auto":
        method = "closed_form" if problem.decomp.is_piecewise_constant() else "ode"
    if method not in ("closed_form", "ode"):
        raise ValueError(f"unknown method {method!r} for solve_modified")

    domain = problem.domain
    bp = problem.interior_knots
    knots = problem.knots

    if method == "closed_form":
        _require_piecewise_constant(problem, "solve_modified")
        chi_al = problem.decomp.chi.with_breakpoints(bp)
        abar0 = float(problem.decomp.a_bar[0])
        a_vals = [float(c[0]) * abar0 for c in chi_al.pieces]
        f_al = problem.f.with_breakpoints(bp)

        # per piece: Q with Q(left) = Q'(left) = 0 and Q'' = -f/A
        q_pieces, dq_pieces = [], []
        for i, (fc, a) in enumerate(zip(f_al.pieces, a_vals)):
            left = knots[i]
            d1 = npoly.polyint(-fc / a)
            d1 = d1 + 0.0
            d1[0] -= npoly.polyval(left, d1)
            q = npoly.polyint(d1)
            q = q + 0.0
            q[0] -= npoly.polyval(left, q)
            q_pieces.append(q)
            dq_pieces.append(d1)

        # march value/slope across pieces, affine in the unknown initial slope
        val = np.array([0.0, 0.0])  # w(left_i) = val[0] + val[1]*s0
        slope = np.array([0.0, 1.0])
        piece_states = []
        for i, (q, d1) in enumerate(zip(q_pieces, dq_pieces)):
            left, right = knots[i], knots[i + 1]
            piece_states.append((val.copy(), slope.copy()))
            val = val + slope * (right - left)
            val[0] += npoly.polyval(right, q)
            slope = slope.copy()
            slope[0] += npoly.polyval(right, d1)
        if val[1] == 0.0:
            raise ValueError("degenerate problem: boundary condition cannot fix the slope")
        s0 = -val[0] / val[1]

        u_pieces = []
        for i, q in enumerate(q_pieces):
            (v_aff, s_aff) = piece_states[i]
            v_num = v_aff[0] + v_aff[1] * s0
            s_num = s_aff[0] + s_aff[1] * s0
            left = knots[i]
            u_pieces.append(npoly.polyadd(q, [v_num - s_num * left, s_num]))
        u_pw = PiecewiseFunction1D(domain, bp, u_pieces)
        return SolutionFunction("modified", "closed_form", problem, piecewise=u_pw)

    # --- linear shooting with RK4 ---
    steps = int(steps_per_interval)
    if steps < 2:
        raise ValueError(
            f"steps_per_interval={steps_per_interval} is below the minimum of 2"
        )
    a_al, da_al, f_al = problem.aligned_pieces()

    gx = [knots[0]]
    gp = [np.array([0.0, 0.0])]  # particular: (w, w')
    gh = [np.array([0.0, 1.0])]  # homogeneous: unit initial slope
    for i in range(len(knots) - 1):
        ac, dac, fc = a_al.pieces[i], da_al.pieces[i], f_al.pieces[i]

        def rhs(x, yp, yh):
            a = npoly.polyval(x, ac)
            da = npoly.polyval(x, dac)
            fv = npoly.polyval(x, fc)
            return (
                np.array([yp[1], -(fv + da * yp[1]) / a]),
                np.array([yh[1], -(da * yh[1]) / a]),
            )

        h = (knots[i + 1] - knots[i]) / steps
        x = knots[i]
        yp, yh = gp[-1].copy(), gh[-1].copy()
        for _ in range(steps):
            k1p, k1h = rhs(x, yp, yh)
            k2p, k2h = rhs(x + 0.5 * h, yp + 0.5 * h * k1p, yh + 0.5 * h * k1h)
            k3p, k3h = rhs(x + 0.5 * h, yp + 0.5 * h * k2p, yh + 0.5 * h * k2h)
            k4p, k4h = rhs(x + h, yp + h * k3p, yh + h * k3h)
            yp = yp + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
            yh = yh + (h / 6.0) * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
            x = x + h
            gx.append(x)
            gp.append(yp)
            gh.append(yh)
        # snap to the knot to avoid drift from repeated addition
        gx[-1] = knots[i + 1]

    gp = np.asarray(gp)
    gh = np.asarray(gh)
    if gh[-1, 0] == 0.0:
        raise ValueError("degenerate problem: homogeneous trajectory vanishes at hi")
    kappa = -gp[-1, 0] / gh[-1, 0]
    gv = gp[:, 0] + kappa * gh[:, 0]
    gd = gp[:, 1] + kappa * gh[:, 1]
    return SolutionFunction(
        "modified", "ode", problem, grid=(np.asarray(gx), gv, gd)
    )


class DiracCombination:
    """A finite combination sum_k c_k * delta_{j_k} on an interval.

    Atoms must sit strictly inside the domain: a Dirac mass on the boundary
    is not an element of the dual of H^1_0, so it is rejected as a domain
    error.  Zero weights are kept (the locations carry information).
    """

    def __init__(self, domain, atoms):
        lo, hi = float(domain[0]), float(domain[1])
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError("domain must be a finite interval (lo, hi) with lo < hi")
        locs, weights = [], []
        for loc, w in atoms:
            loc, w = float(loc), float(w)
            if not (lo < loc < hi):
                raise ValueError(
                    f"atom location {loc} is on or outside the boundary of ({lo}, {hi})"
                )
            if not np.isfinite(w):
                raise ValueError(f"atom weight at {loc} is not finite")
            locs.append(loc)
            weights.append(w)
        order = np.argsort(locs) if locs else []
        self.domain_lo, self.domain_hi = lo, hi
        self.locations = tuple(locs[i] for i in order)
        self.weights = tuple(weights[i] for i in order)

    @property
    def domain(self):
        return (self.domain_lo, self.domain_hi)

    def __len__(self):
        return len(self.locations)

    def __repr__(self):
        atoms = list(zip(self.locations, self.weights))
        return f"DiracCombination(domain={self.domain}, atoms={atoms})"


def rm_transform(problem, utilde=None):
    """Atoms of the residual transform defect Tf - f for the problem's data.

    Plugging the modified solution w into the divergence-form operator
    leaves, beyond f itself, the distribution

        Tf - f = - sum_k (chi+ - chi-) nu a_bar(j_k) w'(j_k) delta_{j_k},

    one atom per jump of chi (zero-weight atoms are kept).  T fixes f
    exactly when w' vanishes at every jump.
    """
    if utilde is None:
        utilde = solve_modified(problem)
    atoms = []
    for rec in jump_set(problem.decomp):
        coupling = rec.signed_jump * npoly.polyval(rec.location, problem.decomp.a_bar)
        atoms.append((rec.location, -coupling * utilde.evaluate(rec.location, 1)))
    return DiracCombination(problem.domain, atoms)


class KernelReport:
    """Outcome of the fixed-point test for the residual transform."""

    def __init__(self, member, tol, diagnostics):
        self.member = bool(member)
        self.tol = float(tol)
        self.diagnostics = list(diagnostics)

    def max_defect(self):
        return max((abs(d["weight"]) for d in self.diagnostics), default=0.0)

    def __repr__(self):
        return f"KernelReport(member={self.member}, max_defect={self.max_defect():.3e})"


def kernel_membership(problem, tol=1e-9, utilde=None):
    """Is f a fixed point of the residual transform (Tf = f)?

    True iff the modified solution's slope vanishes at every jump, tested as
    max_k |(chi+ - chi-) nu a_bar(j_k) w'(j_k)| <= tol.  A problem with no
    jumps is trivially a member.  Returns a KernelReport with per-jump
    diagnostics (location, coupling, slope, atom weight).
    """
    if utilde is None:
        utilde = solve_modified(problem)
    diagnostics = []
    worst = 0.0
    for rec in jump_set(problem.decomp):
        coupling = rec.signed_jump * npoly.polyval(rec.location, problem.decomp.a_bar)
        slope = utilde.evaluate(rec.location, 1)
        weight = -coupling * slope
        worst = max(worst, abs(weight))
        diagnostics.append(
            {
                "location": rec.location,
                "coupling": coupling,
                "utilde_prime": slope,
                "weight": weight,
            }
        )
    return KernelReport(worst <= tol, tol, diagnostics)


def h_minus_one_norm(g):
    """Dual (H^-1) norm of a Dirac combination on its interval.

    Uses the Green's function of -d^2/dx^2 + 1 with Dirichlet conditions,

        G(x, xi) = sinh(min - lo) sinh(hi - max) / sinh(hi - lo),

    for which ||sum c_k delta_{j_k}||^2 = sum_{k,l} c_k c_l G(j_k, j_l).
    A unit mass at the center of (-1, 1) has norm sqrt(tanh(1)/2).
    """
    if len(g) == 0:
        return 0.0
    lo, hi = g.domain
    locs = np.asarray(g.locations)
    w = np.asarray(g.weights)
    xmin = np.minimum.outer(locs, locs)
    xmax = np.maximum.outer(locs, locs)
    green = np.sinh(xmin - lo) * np.sinh(hi - xmax) / math.sinh(hi - lo)
    val = float(w @ green @ w)
    return math.sqrt(max(val, 0.0))
