"""Shared test fixtures: canonical problems, random generators, oracles.

The Galerkin oracle here is deliberately independent of the package's
closed-form dual norm: it expands the Dirac combination in a sine basis and
Richardson-extrapolates two dyadic truncations of the spectral sum.
"""

import numpy as np
from numpy.polynomial import polynomial as npoly

from rmlab.exact import BVPProblem
from rmlab.piecewise import CoefficientDecomposition, PiecewiseFunction1D


def make_problem(chi_values, chi_breaks, a_bar, f_pieces, f_breaks, domain=(-1.0, 1.0)):
    chi = PiecewiseFunction1D(domain, chi_breaks, [[v] for v in chi_values])
    decomp = CoefficientDecomposition(chi, a_bar)
    f = PiecewiseFunction1D(domain, f_breaks, f_pieces)
    return BVPProblem(decomp, f)


def failure_problem():
    """chi = (1/2, 1) at 0, a_bar = 1, f = (0, -2): the deviating example."""
    return make_problem([0.5, 1.0], [0.0], [1.0], [[0.0], [-2.0]], [0.0])


def invariant_problem():
    """Same coefficient, f = (-1, -2): u and the modified solution coincide."""
    return make_problem([0.5, 1.0], [0.0], [1.0], [[-1.0], [-2.0]], [0.0])


def random_pwc_problem(rng, max_jumps=3, domain=(-1.0, 1.0)):
    """Random piecewise-constant coefficient with random polynomial data."""
    lo, hi = domain
    n_j = int(rng.integers(1, max_jumps + 1))
    bp = np.sort(rng.uniform(lo + 0.1, hi - 0.1, size=n_j))
    while np.any(np.diff(bp) < 5e-2):
        bp = np.sort(rng.uniform(lo + 0.1, hi - 0.1, size=n_j))
    chi_vals = rng.uniform(0.2, 4.0, size=n_j + 1)
    a_bar = [float(rng.uniform(0.5, 2.0))]
    n_fb = int(rng.integers(0, 3))
    f_breaks = np.sort(rng.uniform(lo + 0.1, hi - 0.1, size=n_fb))
    while np.any(np.diff(f_breaks) < 5e-2) or np.any(
        np.abs(f_breaks[:, None] - bp[None, :]) < 5e-2 if n_fb else False
    ):
        f_breaks = np.sort(rng.uniform(lo + 0.1, hi - 0.1, size=n_fb))
    f_pieces = [rng.uniform(-3, 3, size=rng.integers(1, 5)) for _ in range(n_fb + 1)]
    return make_problem(chi_vals, bp, a_bar, f_pieces, f_breaks, domain)


def random_smooth_coeff_problem(rng, domain=(-1.0, 1.0)):
    """Random jumpy chi with a genuinely non-constant (positive) a_bar."""
    bp = [float(rng.uniform(-0.5, 0.5))]
    chi_vals = rng.uniform(0.3, 3.0, size=2)
    # 1 + b x + c x^2 with |b| + |c| < 1 stays positive on [-1, 1]
    b, c = rng.uniform(-0.45, 0.45, size=2)
    a_bar = [1.0, float(b), float(c)]
    f_pieces = [rng.uniform(-2, 2, size=3) for _ in range(2)]
    return make_problem(chi_vals, bp, a_bar, f_pieces, bp, domain)


def left_limit(pf, x, order=0):
    """Exact limit from the left at a knot of a piecewise polynomial."""
    idx = int(pf.piece_index(x))
    if idx == 0:
        raise ValueError(f"{x} has no piece on its left")
    coeffs = pf.pieces[idx - 1]
    for _ in range(order):
        coeffs = npoly.polyder(coeffs)
    return float(npoly.polyval(x, coeffs))


def one_sided(fn, x, side, order=0, h=1e-7):
    """Richardson probe of a one-sided limit; fn is callable as fn(x, order)."""
    s = 1.0 if side == "right" else -1.0
    return 2.0 * fn(x + s * h, order) - fn(x + 2 * s * h, order)


def interface_defects(problem, u, utilde, exact=True):
    """(flux jump of u, slope jump of utilde) maximized over the interfaces.

    With exact=True both solutions must be closed-form (piecewise backed) and
    one-sided limits are evaluated from the polynomial pieces; otherwise
    Richardson probes are used, which cost a few orders of accuracy.
    """
    from rmlab.piecewise import jump_set

    flux_defect = 0.0
    slope_defect = 0.0
    a_pw = problem.decomp.a_piecewise()
    for rec in jump_set(problem.decomp):
        j = rec.location
        a_right = problem.a_value(j)
        a_left = left_limit(a_pw, j)
        if exact:
            du_r = u.evaluate(j, 1)
            du_l = left_limit(u.piecewise, j, 1)
            dt_r = utilde.evaluate(j, 1)
            dt_l = left_limit(utilde.piecewise, j, 1)
        else:
            du_r = one_sided(u, j, "right", 1)
            du_l = one_sided(u, j, "left", 1)
            dt_r = one_sided(utilde, j, "right", 1)
            dt_l = one_sided(utilde, j, "left", 1)
        flux_defect = max(flux_defect, abs(a_right * du_r - a_left * du_l))
        slope_defect = max(slope_defect, abs(dt_r - dt_l))
    return flux_defect, slope_defect


def galerkin_h_minus_one(g, n_modes=1 << 21, chunk=1 << 18):
    """Independent dual-norm oracle for a Dirac combination.

    Expand in sin(n pi (x-lo)/L); the squared dual norm is
    sum_n b_n^2 / [(L/2)(1 + (n pi / L)^2)].  The truncation tail decays like
    C/N on average, so Richardson across two dyadic cutoffs (2 S(N) - S(N/2))
    removes it to O(1/N^2).
    """
    if len(g) == 0:
        return 0.0
    lo, hi = g.domain
    length = hi - lo
    locs = np.asarray(g.locations)
    w = np.asarray(g.weights)

    def partial(n_max):
        total = 0.0
        for start in range(1, n_max + 1, chunk):
            n = np.arange(start, min(start + chunk, n_max + 1))
            freq = n * np.pi / length
            basis = np.sin(freq[:, None] * (locs[None, :] - lo))
            b = basis @ w
            total += float(np.sum(b * b / ((length / 2.0) * (1.0 + freq**2))))
        return total

    s_half = partial(n_modes // 2)
    s_full = partial(n_modes)
    return float(np.sqrt(max(2.0 * s_full - s_half, 0.0)))


def kink_family(radii=(1.0, 0.5, 0.25, 0.125)):
    """Modified solutions x (1 - (x/r)^2)^2 localized on [-r, r].

    Each has unit slope at the interface x = 0 while the support (hence the
    norm) shrinks with r.  Returns [(r, problem, utilde_pw), ...] where f is
    manufactured so the given function solves the non-divergence equation
    with chi = (1/2, 1).
    """
    chi_vals = [0.5, 1.0]
    out = []
    for r in radii:
        # x - 2 x^3 / r^2 + x^5 / r^4 on [-r, r], zero outside
        bump = np.array([0.0, 1.0, 0.0, -2.0 / r**2, 0.0, 1.0 / r**4])
        ddbump = npoly.polyder(bump, m=2)
        if r < 1.0:
            ut_breaks = [-r, 0.0, r]
            ut_pieces = [[0.0], bump, bump, [0.0]]
            f_breaks = [-r, 0.0, r]
            f_pieces = [[0.0], -chi_vals[0] * ddbump, -chi_vals[1] * ddbump, [0.0]]
        else:
            ut_breaks = [0.0]
            ut_pieces = [bump, bump]
            f_breaks = [0.0]
            f_pieces = [-chi_vals[0] * ddbump, -chi_vals[1] * ddbump]
        problem = make_problem(chi_vals, [0.0], [1.0], f_pieces, f_breaks)
        utilde_pw = PiecewiseFunction1D((-1.0, 1.0), ut_breaks, ut_pieces)
        out.append((r, problem, utilde_pw))
    return out
