"""Piecewise-polynomial machinery for 1-d interface coefficients.

Everything downstream (exact solvers, residual risks, quadrature) works with
functions that are polynomial between a finite set of breakpoints.  This
module provides that representation, the ``chi * a_bar`` factorization of a
discontinuous diffusion coefficient, its jump records, and the jump
functional ``mu`` that measures how strongly a candidate slope field excites
the interfaces.
"""

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "PiecewiseFunction1D",
    "CoefficientDecomposition",
    "JumpRecord",
    "evaluate",
    "jump_set",
    "mu_functional",
    "pw_sub",
]


def _coeff_array(coeffs, where="coefficients"):
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1 or c.size == 0:
        raise ValueError(f"{where}: expected a nonempty 1-d coefficient sequence")
    if not np.all(np.isfinite(c)):
        raise ValueError(f"{where}: coefficients must be finite")
    return c


def _poly_range(coeffs, lo, hi):
    """Exact (min, max) of a polynomial over the closed interval [lo, hi].

    Candidates are the endpoints plus the real roots of the derivative that
    fall inside the interval.
    """
    cand = [lo, hi]
    der = npoly.polyder(coeffs)
    if np.count_nonzero(der) > 0 and der.size > 1:
        for r in npoly.polyroots(der):
            if abs(r.imag) < 1e-12 and lo < r.real < hi:
                cand.append(float(r.real))
    vals = npoly.polyval(np.asarray(cand), coeffs)
    return float(vals.min()), float(vals.max())


class PiecewiseFunction1D:
    """A function on [domain_lo, domain_hi] built from polynomial pieces.

    Pieces live on the half-open subintervals ``[knot_i, knot_{i+1})`` cut by
    the breakpoints, so evaluation exactly at a breakpoint uses the piece on
    the right; the right domain endpoint is evaluated by the last piece.
    Coefficients are ascending (``c[0] + c[1]*x + ...``) in the global x
    coordinate.  Instances are immutable after construction.
    """

    def __init__(self, domain, breakpoints, pieces):
        lo, hi = float(domain[0]), float(domain[1])
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError("domain must be a finite interval (lo, hi) with lo < hi")
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1:
            raise ValueError("breakpoints must be a 1-d sequence")
        if bp.size:
            if not np.all(np.isfinite(bp)):
                raise ValueError("breakpoints must be finite")
            if np.any(np.diff(bp) <= 0):
                raise ValueError("breakpoints must be strictly increasing")
            if bp[0] <= lo or bp[-1] >= hi:
                raise ValueError("breakpoints must lie strictly inside the domain")
        if len(pieces) != bp.size + 1:
            raise ValueError(
                f"need {bp.size + 1} pieces for {bp.size} breakpoints, got {len(pieces)}"
            )
        self.domain_lo = lo
        self.domain_hi = hi
        self.breakpoints = bp
        self.pieces = tuple(_coeff_array(c, f"piece {i}") for i, c in enumerate(pieces))
        self.breakpoints.setflags(write=False)
        for arr in self.pieces:
            arr.setflags(write=False)
        # per-order derivative coefficients, filled lazily by evaluate()
        self._dcache = {}

    @property
    def domain(self):
        return (self.domain_lo, self.domain_hi)

    @property
    def knots(self):
        """Domain endpoints plus interior breakpoints, sorted ascending."""
        return np.concatenate(([self.domain_lo], self.breakpoints, [self.domain_hi]))

    def piece_index(self, x):
        """Index of the piece owning x (right-continuous at breakpoints)."""
        return np.searchsorted(self.breakpoints, x, side="right")

    def _piece_coeffs(self, order):
        if order == 0:
            return self.pieces
        if order not in self._dcache:
            self._dcache[order] = tuple(
                npoly.polyder(c, m=order) if c.size > order else np.zeros(1)
                for c in self.pieces
            )
        return self._dcache[order]

    def __call__(self, x, order=0):
        return evaluate(self, x, order)

    def jet_batch(self, xs):
        """(value, first, second derivative) arrays at the points xs."""
        xs = np.asarray(xs, dtype=float)
        return evaluate(self, xs, 0), evaluate(self, xs, 1), evaluate(self, xs, 2)

    def derivative(self, order=1):
        """Differentiate every piece; breakpoints are kept as-is."""
        return PiecewiseFunction1D(self.domain, self.breakpoints, self._piece_coeffs(order))

    def antiderivative(self, start_value=0.0):
        """The continuous antiderivative F with F(domain_lo) = start_value.

        Integration constants are chained across breakpoints so the result
        is continuous on the whole domain.
        """
        knots = self.knots
        out = []
        acc = float(start_value)
        for i, c in enumerate(self.pieces):
            prim = npoly.polyint(c)
            prim = prim + 0.0  # writable copy
            prim[0] += acc - npoly.polyval(knots[i], prim)
            out.append(prim)
            acc = npoly.polyval(knots[i + 1], prim)
        return PiecewiseFunction1D(self.domain, self.breakpoints, out)

    def with_breakpoints(self, breakpoints):
        """Re-express the same function on a refined breakpoint set.

        The new set must contain every existing breakpoint.
        """
        bp = np.asarray(breakpoints, dtype=float)
        missing = [b for b in self.breakpoints if not np.any(bp == b)]
        if missing:
            raise ValueError(f"refined breakpoints must include {missing}")
        edges = np.concatenate(([self.domain_lo], bp, [self.domain_hi]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        pieces = [self.pieces[i] for i in self.piece_index(mids)]
        return PiecewiseFunction1D(self.domain, bp, pieces)

    def max_degree(self):
        return max(int(np.trim_zeros(c, "b").size or 1) - 1 for c in self.pieces)

    def __repr__(self):
        return (
            f"PiecewiseFunction1D(domain=({self.domain_lo}, {self.domain_hi}), "
            f"breakpoints={self.breakpoints.tolist()}, pieces={len(self.pieces)})"
        )


def evaluate(pf, x, order=0):
    """Evaluate pf or one of its derivatives at x (scalar or array).

    Evaluation at a breakpoint follows the half-open convention and returns
    the right piece's value; x = domain_hi is evaluated by the last piece.
    Points outside the closed domain raise a domain error.
    """
    if order not in (0, 1, 2):
        raise ValueError("derivative order must be 0, 1 or 2")
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    bad = (xs < pf.domain_lo) | (xs > pf.domain_hi) | ~np.isfinite(xs)
    if np.any(bad):
        raise ValueError(
            f"x={xs[bad][0]!r} outside domain [{pf.domain_lo}, {pf.domain_hi}]"
        )
    coeff = pf._piece_coeffs(order)
    idx = pf.piece_index(xs)
    out = np.empty_like(xs)
    for i in np.unique(idx):
        sel = idx == i
        out[sel] = npoly.polyval(xs[sel], coeff[i])
    return float(out[0]) if scalar else out


def _binary_op(f, g, op):
    if (f.domain_lo, f.domain_hi) != (g.domain_lo, g.domain_hi):
        raise ValueError("operands live on different domains")
    bp = np.unique(np.concatenate((f.breakpoints, g.breakpoints)))
    fr, gr = f.with_breakpoints(bp), g.with_breakpoints(bp)
    pieces = [op(a, b) for a, b in zip(fr.pieces, gr.pieces)]
    return PiecewiseFunction1D(f.domain, bp, pieces)


def pw_sub(f, g):
    """Exact difference f - g as a piecewise polynomial on merged breakpoints."""
    return _binary_op(f, g, npoly.polysub)


class CoefficientDecomposition:
    """Interface coefficient A = chi * a_bar.

    ``chi`` is piecewise constant with strictly positive values and carries
    all the jumps; ``a_bar`` is a single polynomial, smooth across the whole
    domain and strictly positive on it.  Uniform ellipticity
    0 < lam <= A <= Lam is validated at construction.  The absolutely
    continuous part of the derivative of A is chi * a_bar'.
    """

    def __init__(self, chi, a_bar):
        if not isinstance(chi, PiecewiseFunction1D):
            raise ValueError("chi must be a PiecewiseFunction1D")
        values = []
        for i, c in enumerate(chi.pieces):
            trimmed = np.trim_zeros(c, "b")
            if trimmed.size > 1:
                raise ValueError(f"chi piece {i} is not constant")
            values.append(float(c[0]))
        values = np.asarray(values)
        if np.any(values <= 0.0):
            raise ValueError("chi must be strictly positive everywhere (chi_min > 0)")
        a_bar = _coeff_array(a_bar, "a_bar")
        abar_lo, abar_hi = _poly_range(a_bar, chi.domain_lo, chi.domain_hi)
        if abar_lo <= 0.0:
            raise ValueError(
                "a_bar must be strictly positive on the domain (uniform ellipticity)"
            )
        self.chi = chi
        self.chi_values = values
        self.chi_values.setflags(write=False)
        self.a_bar = a_bar
        # ellipticity constants: extrema of chi_i * a_bar over each piece
        knots = chi.knots
        lam, big = np.inf, -np.inf
        for i, v in enumerate(values):
            m, M = _poly_range(a_bar, knots[i], knots[i + 1])
            lam, big = min(lam, v * m), max(big, v * M)
        self.lam = lam
        self.big_lam = big

    @property
    def domain(self):
        return self.chi.domain

    @property
    def domain_lo(self):
        return self.chi.domain_lo

    @property
    def domain_hi(self):
        return self.chi.domain_hi

    def a_value(self, x):
        """A(x) = chi(x) * a_bar(x)."""
        return evaluate(self.chi, x) * npoly.polyval(np.asarray(x, dtype=float), self.a_bar)

    def da_ac(self, x):
        """Absolutely continuous part of A': chi(x) * a_bar'(x)."""
        return evaluate(self.chi, x) * npoly.polyval(
            np.asarray(x, dtype=float), npoly.polyder(self.a_bar)
        )

    def a_piecewise(self):
        """A as an explicit piecewise polynomial (chi breakpoints)."""
        pieces = [v * self.a_bar for v in self.chi_values]
        return PiecewiseFunction1D(self.domain, self.chi.breakpoints, pieces)

    def da_ac_piecewise(self):
        """chi * a_bar' as an explicit piecewise polynomial."""
        da = npoly.polyder(self.a_bar) if self.a_bar.size > 1 else np.zeros(1)
        pieces = [v * da for v in self.chi_values]
        return PiecewiseFunction1D(self.domain, self.chi.breakpoints, pieces)

    def is_piecewise_constant(self):
        return np.trim_zeros(self.a_bar, "b").size <= 1

    def __repr__(self):
        return (
            f"CoefficientDecomposition(chi_values={self.chi_values.tolist()}, "
            f"a_bar={self.a_bar.tolist()}, lam={self.lam:g}, Lam={self.big_lam:g})"
        )


class JumpRecord:
    """One interface: location, one-sided chi limits and orientation.

    The canonical orientation is nu = +1 with chi_plus the limit from the
    right.  The triple is only determined up to the simultaneous swap
    (chi_plus, chi_minus, nu) -> (chi_minus, chi_plus, -nu); every quantity
    derived from it downstream is invariant under that swap.
    """

    __slots__ = ("location", "chi_plus", "chi_minus", "nu")

    def __init__(self, location, chi_plus, chi_minus, nu=1.0):
        if nu not in (-1.0, 1.0, -1, 1):
            raise ValueError("nu must be +1 or -1")
        if chi_plus == chi_minus:
            raise ValueError("not a jump: one-sided values coincide")
        object.__setattr__(self, "location", float(location))
        object.__setattr__(self, "chi_plus", float(chi_plus))
        object.__setattr__(self, "chi_minus", float(chi_minus))
        object.__setattr__(self, "nu", float(nu))

    def __setattr__(self, name, value):
        raise AttributeError("JumpRecord is immutable")

    def swapped(self):
        """The equivalent record with the opposite orientation."""
        return JumpRecord(self.location, self.chi_minus, self.chi_plus, -self.nu)

    @property
    def signed_jump(self):
        """(chi_plus - chi_minus) * nu; swap-invariant."""
        return (self.chi_plus - self.chi_minus) * self.nu

    def __repr__(self):
        return (
            f"JumpRecord(location={self.location}, chi_plus={self.chi_plus}, "
            f"chi_minus={self.chi_minus}, nu={self.nu:+g})"
        )


def jump_set(decomp):
    """Jump records of A = chi * a_bar in canonical orientation (nu = +1).

    One record per breakpoint of chi where the adjacent constants differ;
    breakpoints with equal constants on both sides are omitted.
    """
    records = []
    vals = decomp.chi_values
    for k, b in enumerate(decomp.chi.breakpoints):
        left, right = vals[k], vals[k + 1]
        if left != right:
            records.append(JumpRecord(b, chi_plus=right, chi_minus=left, nu=1.0))
    return records


def mu_functional(decomp, phi_prime, subset=None, jumps=None):
    """Jump functional: sum over jumps of (chi+ - chi-) * nu * a_bar(j) * phi'(j).

    ``phi_prime`` is a callable giving the slope of the probe function at a
    point.  ``subset``, if given, is an interval (a, b) restricting the sum
    to jumps with a <= location <= b.  ``jumps`` may supply explicit records
    (e.g. with swapped orientation; the value is swap-invariant) and defaults
    to jump_set(decomp).  Linear in phi', and identically zero iff the jump
    set is empty.
    """
    records = jump_set(decomp) if jumps is None else list(jumps)
    if subset is not None:
        a, b = float(subset[0]), float(subset[1])
        records = [r for r in records if a <= r.location <= b]
    total = 0.0
    for r in records:
        slope = float(phi_prime(r.location))
        if not np.isfinite(slope):
            raise ValueError(f"phi_prime is not finite at jump location {r.location}")
        total += r.signed_jump * npoly.polyval(r.location, decomp.a_bar) * slope
    return total
