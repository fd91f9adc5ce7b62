"""Preparation-time distributions on [0, 1] and the exponential service law.

Two distribution families are supported:

* :class:`PolynomialCdf` — F(x) = sum_i c_i x^i on [0, 1], the form the exact
  solver consumes. ``c_0 > 0`` encodes an atom at 0.
* :class:`PiecewisePolynomialCdf` — continuous piecewise-polynomial CDFs
  (e.g. the symmetric triangular law), used as ground truth for fitting and
  by the oracles.

All values are immutable after construction and every operation is pure, so
instances are safe to share across threads. Coefficients are stored in
ascending power order throughout.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from ._moments import moment_table
from .errors import NotACdf

__all__ = [
    "ExponentialService",
    "PolynomialCdf",
    "PiecewisePolynomialCdf",
    "eval_cdf",
    "eval_density",
    "validate",
    "cdf_violations",
    "prob_B_greater_A",
    "inverse_cdf",
    "sample",
    "parse_distribution_spec",
    "uniform_cdf",
    "triangular_cdf",
]

#: Trailing coefficients below this magnitude are trimmed when validating.
TRIM_TOL = 1e-12

#: Monotonicity slack: the density may dip this far below zero numerically.
DENSITY_TOL = 1e-12

#: Grid resolution for the monotonicity check.
_VALIDATION_GRID = 4096

#: Bisection tolerance of inverse-CDF sampling.
_INVERSE_TOL = 1e-12


@dataclass(frozen=True)
class ExponentialService:
    """Exponential service law with the given rate (per unit time)."""

    rate: float

    def __post_init__(self):
        if not (isinstance(self.rate, (int, float)) and self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"service rate must be a positive finite real, got {self.rate!r}")


def _horner(coeffs, x):
    """Evaluate sum_i coeffs[i] * x^i by Horner's rule (scalar or array x)."""
    acc = coeffs[-1]
    if isinstance(x, np.ndarray):
        acc = np.full_like(x, acc, dtype=float)
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


def _horner_exact(coeffs, x: Fraction) -> Fraction:
    """Exact rational Horner evaluation (floats are exact rationals)."""
    acc = Fraction(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        acc = acc * x + Fraction(c)
    return acc


@dataclass(frozen=True)
class PolynomialCdf:
    """CDF F(x) = sum_i coeffs[i] * x^i on [0, 1].

    Invariants (enforced by :func:`validate`, which is the intended
    constructor for untrusted input): coefficients sum to 1, the constant
    term (the atom at 0) lies in [0, 1), and the derivative polynomial is
    nonnegative on [0, 1] up to ``DENSITY_TOL``.
    """

    coeffs: tuple[float, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def atom(self) -> float:
        """Probability mass at exactly 0."""
        return self.coeffs[0]

    def segments(self) -> list[tuple[float, float, tuple[float, ...]]]:
        """The distribution as (start, end, coefficient) pieces."""
        return [(0.0, 1.0, self.coeffs)]

    def cdf(self, x):
        return eval_cdf(self, x)

    def density(self, x):
        return eval_density(self, x)


@dataclass(frozen=True)
class PiecewisePolynomialCdf:
    """Continuous piecewise-polynomial CDF on [0, 1].

    ``breakpoints`` are increasing, starting at 0 and ending at 1;
    ``polys[j]`` holds the ascending coefficients of the polynomial valid on
    ``[breakpoints[j], breakpoints[j+1]]`` in *global* x coordinates.
    """

    breakpoints: tuple[float, ...]
    polys: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        problems = _piecewise_violations(self.breakpoints, self.polys)
        if problems:
            raise NotACdf(problems)

    @property
    def atom(self) -> float:
        return float(_horner(self.polys[0], 0.0))

    def segments(self) -> list[tuple[float, float, tuple[float, ...]]]:
        return [
            (self.breakpoints[j], self.breakpoints[j + 1], tuple(self.polys[j]))
            for j in range(len(self.polys))
        ]

    def _segment_index(self, x) -> int:
        idx = bisect_right(self.breakpoints, x) - 1
        return min(max(idx, 0), len(self.polys) - 1)

    def cdf(self, x):
        return eval_cdf(self, x)

    def density(self, x):
        return eval_density(self, x)


def eval_cdf(dist, x):
    """Evaluate a distribution's CDF: 0 below 0, F(x) on [0, 1], 1 above 1.

    Accepts scalars, :class:`fractions.Fraction` (evaluated exactly, for the
    fitting code's exact-node queries), and numpy arrays.
    """
    if isinstance(x, np.ndarray):
        if isinstance(dist, PolynomialCdf):
            val = _horner(dist.coeffs, np.clip(x, 0.0, 1.0))
        else:
            xc = np.clip(x, 0.0, 1.0)
            val = np.empty_like(xc)
            edges = np.searchsorted(dist.breakpoints, xc, side="right") - 1
            edges = np.clip(edges, 0, len(dist.polys) - 1)
            for j, poly in enumerate(dist.polys):
                mask = edges == j
                if np.any(mask):
                    val[mask] = _horner(poly, xc[mask])
        return np.where(x < 0.0, 0.0, np.where(x >= 1.0, 1.0, val))
    if isinstance(x, Rational) and not isinstance(x, int):
        if x < 0:
            return Fraction(0)
        if x >= 1:
            return Fraction(1)
        x = Fraction(x)
        if isinstance(dist, PolynomialCdf):
            return _horner_exact(dist.coeffs, x)
        return _horner_exact(dist.polys[dist._segment_index(x)], x)
    x = float(x)
    if x < 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    if isinstance(dist, PolynomialCdf):
        return float(_horner(dist.coeffs, x))
    return float(_horner(dist.polys[dist._segment_index(x)], x))


def _derivative_coeffs(coeffs) -> tuple[float, ...]:
    return tuple(i * c for i, c in enumerate(coeffs))[1:] or (0.0,)


def eval_density(dist, x):
    """Evaluate the density (CDF derivative) at x in (0, 1].

    The atom at 0, if any, is not part of the density; it is reported
    separately as the distribution's ``atom``.
    """
    scalar = not isinstance(x, np.ndarray)
    xs = np.asarray(x, dtype=float)
    if np.any((xs <= 0.0) | (xs > 1.0)):
        raise ValueError("density is defined on (0, 1] only")
    if isinstance(dist, PolynomialCdf):
        val = _horner(_derivative_coeffs(dist.coeffs), xs)
    else:
        val = np.empty_like(xs)
        edges = np.searchsorted(dist.breakpoints, xs, side="right") - 1
        edges = np.clip(edges, 0, len(dist.polys) - 1)
        for j, poly in enumerate(dist.polys):
            mask = edges == j
            if np.any(mask):
                val[mask] = _horner(_derivative_coeffs(poly), xs[mask])
    return float(val) if scalar else val


def _golden_min(fun, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Minimum value of ``fun`` on [lo, hi] by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return min(fc, fd, fun(a), fun(b))


def _monotone_violation(coeffs, lo: float, hi: float) -> float | None:
    """Most negative density value of the piece on [lo, hi], if any.

    Grid scan (share of the 4096-point budget proportional to length) plus
    golden-section refinement around near-zero cells, per the documented
    validation strategy; exhaustive root isolation is intentionally avoided.
    """
    dcoeffs = _derivative_coeffs(coeffs)
    npts = max(8, int(_VALIDATION_GRID * (hi - lo)) + 1)
    xs = np.linspace(lo, hi, npts)
    vals = _horner(dcoeffs, xs)
    worst = float(np.min(vals))
    if worst < -DENSITY_TOL:
        return worst
    # Refine wherever the grid gets suspiciously close to zero: a strictly
    # positive density cannot dip below -tol between grid points unless the
    # grid values are already small.
    scale = max(1.0, float(np.max(np.abs(vals))))
    suspect = np.nonzero(vals < 1e-4 * scale)[0]
    fun = lambda x: float(_horner(dcoeffs, x))
    checked: set[int] = set()
    for i in suspect:
        cell = int(i)
        if cell in checked:
            continue
        checked.add(cell)
        a = xs[max(0, cell - 1)]
        b = xs[min(npts - 1, cell + 1)]
        refined = _golden_min(fun, float(a), float(b))
        worst = min(worst, refined)
        if worst < -DENSITY_TOL:
            return worst
    return None


def cdf_violations(coeffs) -> list[str]:
    """All invariant violations of a coefficient sequence (empty if valid)."""
    coeffs = [float(c) for c in coeffs]
    if not coeffs:
        return ["coefficient sequence is empty"]
    if any(not math.isfinite(c) for c in coeffs):
        return ["coefficients must be finite"]
    while len(coeffs) > 1 and abs(coeffs[-1]) < TRIM_TOL:
        coeffs.pop()
    problems = []
    if len(coeffs) < 2:
        problems.append("degree must be >= 1 after trailing-coefficient trimming")
        return problems
    if -TRIM_TOL <= coeffs[0] < 0.0:
        coeffs[0] = 0.0
    total = math.fsum(coeffs)
    if abs(total - 1.0) > 1e-12:
        problems.append(f"coefficients must sum to 1 (F(1) = 1); got {total!r}")
    if not 0.0 <= coeffs[0] < 1.0:
        problems.append(f"constant term (atom at 0) must lie in [0, 1); got {coeffs[0]!r}")
    worst = _monotone_violation(tuple(coeffs), 0.0, 1.0)
    if worst is not None:
        problems.append(f"density dips to {worst:.3e} < -{DENSITY_TOL:g}: CDF not nondecreasing")
    return problems


def validate(coeffs) -> PolynomialCdf:
    """Validate a coefficient sequence and return the trimmed distribution.

    Raises
    ------
    NotACdf
        Carrying the full list of violated requirements.
    """
    problems = cdf_violations(coeffs)
    if problems:
        raise NotACdf(problems)
    trimmed = [float(c) for c in coeffs]
    while len(trimmed) > 1 and abs(trimmed[-1]) < TRIM_TOL:
        trimmed.pop()
    if -TRIM_TOL <= trimmed[0] < 0.0:
        trimmed[0] = 0.0
    return PolynomialCdf(tuple(trimmed))


def _piecewise_violations(breaks, polys) -> list[str]:
    problems = []
    breaks = [float(b) for b in breaks]
    if len(breaks) < 2 or len(polys) != len(breaks) - 1:
        return ["need one polynomial per interval between breakpoints"]
    if breaks[0] != 0.0 or breaks[-1] != 1.0:
        problems.append("breakpoints must start at 0 and end at 1")
    if any(b1 >= b2 for b1, b2 in zip(breaks, breaks[1:])):
        problems.append("breakpoints must be strictly increasing")
        return problems
    if any(not math.isfinite(c) for poly in polys for c in poly):
        return ["coefficients must be finite"]
    for j in range(1, len(polys)):
        left = _horner(polys[j - 1], breaks[j])
        right = _horner(polys[j], breaks[j])
        if abs(left - right) > 1e-12:
            problems.append(
                f"discontinuity {left - right:.3e} at breakpoint {breaks[j]!r}"
            )
    atom = _horner(polys[0], 0.0)
    if not 0.0 <= atom < 1.0:
        problems.append(f"value at 0 (atom) must lie in [0, 1); got {atom!r}")
    final = _horner(polys[-1], 1.0)
    if abs(final - 1.0) > 1e-12:
        problems.append(f"value at x = 1 must be 1; got {final!r}")
    for j, poly in enumerate(polys):
        worst = _monotone_violation(tuple(poly), breaks[j], breaks[j + 1])
        if worst is not None:
            problems.append(
                f"density dips to {worst:.3e} on segment {j}: CDF not nondecreasing"
            )
    return problems


def _shifted_weighted_integral(coeffs, a: float, b: float, rate: float) -> float:
    """integral_a^b p(t) * rate * e^{-rate*t} dt... without the rate factor.

    Computes integral_a^b p(t) e^{-rate*t} dt for an ascending-coefficient
    polynomial p via the substitution t = a + w*y (w = b - a), which keeps
    every term positive-weighted and feeds the stable moment recurrence:

        integral = e^{-rate*a} * sum_j p_j sum_i C(j,i) a^{j-i} w^{i+1} I_i(-rate*w)
    """
    w = b - a
    if w <= 0.0:
        return 0.0
    jmax = len(coeffs) - 1
    mom = moment_table(jmax, -rate * w)
    total = 0.0
    for j, pj in enumerate(coeffs):
        if pj == 0.0:
            continue
        binom = 1.0
        apow = a**j
        inner = 0.0
        wpow = w
        for i in range(j + 1):
            inner += binom * apow * wpow * mom[i].real
            binom = binom * (j - i) / (i + 1)
            apow = apow / a if a != 0.0 else (1.0 if i == j - 1 else 0.0)
            wpow *= w
        total += pj * inner
    return math.exp(-rate * a) * total


def prob_B_greater_A(dist, svc: ExponentialService) -> float:
    """P[B > A]: the chance preparation outlasts an exponential service.

    Computed in closed form as 1 - E[e^{-rate*B}]; the expectation integrates
    the density against the exponential weight by the stable moment
    recurrence (no quadrature). Strictly inside (0, 1) for every valid,
    nondegenerate distribution.
    """
    mu = svc.rate
    if isinstance(dist, PolynomialCdf):
        mom = moment_table(max(dist.degree - 1, 0), -mu)
        laplace = dist.coeffs[0] + sum(
            k * ck * mom[k - 1].real for k, ck in enumerate(dist.coeffs) if k >= 1
        )
    else:
        laplace = dist.atom
        for a, b, coeffs in dist.segments():
            dens = _derivative_coeffs(coeffs)
            laplace += _shifted_weighted_integral(dens, a, b, mu)
    return 1.0 - laplace


def inverse_cdf(dist, u: float) -> float:
    """Smallest x with F(x) >= u, by bisection to 1e-12.

    The atom at 0 maps the whole deviate range [0, atom] to 0.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError("deviate must lie in [0, 1]")
    if u <= dist.atom:
        return 0.0
    if u >= 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > _INVERSE_TOL:
        mid = 0.5 * (lo + hi)
        if eval_cdf(dist, mid) >= u:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def inverse_cdf_array(dist, u: np.ndarray) -> np.ndarray:
    """Vectorized :func:`inverse_cdf` for Monte Carlo draws."""
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    for _ in range(42):  # halves to ~2e-13 < _INVERSE_TOL
        mid = 0.5 * (lo + hi)
        ge = eval_cdf(dist, mid) >= u
        hi = np.where(ge, mid, hi)
        lo = np.where(ge, lo, mid)
    out = 0.5 * (lo + hi)
    return np.where(u <= dist.atom, 0.0, out)


def sample(dist, rng: np.random.Generator) -> float:
    """One inverse-CDF draw of the preparation time (pure in the rng state)."""
    return inverse_cdf(dist, float(rng.random()))


def uniform_cdf() -> PolynomialCdf:
    """The uniform law on [0, 1]: F(x) = x."""
    return PolynomialCdf((0.0, 1.0))


def triangular_cdf() -> PiecewisePolynomialCdf:
    """The symmetric triangular law on [0, 1] (mode 1/2)."""
    return PiecewisePolynomialCdf(
        breakpoints=(0.0, 0.5, 1.0),
        polys=((0.0, 0.0, 2.0), (-1.0, 4.0, -2.0)),
    )


def parse_distribution_spec(spec):
    """Build a distribution from a JSON spec (string or parsed object).

    Accepted forms: ``{"type": "uniform"}``, ``{"type": "triangular"}``,
    ``{"type": "polynomial", "coeffs": [...]}`` and
    ``{"type": "piecewise", "breaks": [...], "polys": [[...], ...]}``.
    The bare strings ``"uniform"``/``"triangular"`` are shorthand.
    """
    if isinstance(spec, str):
        name = spec.strip().lower()
        if name == "uniform":
            return uniform_cdf()
        if name == "triangular":
            return triangular_cdf()
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise NotACdf([f"distribution spec is not valid JSON: {exc}"]) from exc
    if not isinstance(spec, dict) or "type" not in spec:
        raise NotACdf(["distribution spec must be an object with a 'type' field"])
    kind = str(spec["type"]).lower()
    if kind == "uniform":
        return uniform_cdf()
    if kind == "triangular":
        return triangular_cdf()
    if kind == "polynomial":
        if "coeffs" not in spec:
            raise NotACdf(["polynomial spec needs a 'coeffs' array"])
        return validate(spec["coeffs"])
    if kind == "piecewise":
        if "breaks" not in spec or "polys" not in spec:
            raise NotACdf(["piecewise spec needs 'breaks' and 'polys' arrays"])
        return PiecewisePolynomialCdf(
            tuple(float(b) for b in spec["breaks"]),
            tuple(tuple(float(c) for c in poly) for poly in spec["polys"]),
        )
    raise NotACdf([f"unknown distribution type {kind!r}"])
