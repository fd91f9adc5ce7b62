"""Exact waiting-time solver for W = max{0, B - A - W}.

The steady-state law of the recursion, for exponential service A (rate mu)
and a polynomial preparation CDF B on [0, 1], is an atom at zero plus a
mixture of exponential modes:

    f_W(x) = sum_i d_i * zeta_i * exp(r_i * x),    x in [0, 1],

where the r_i are the roots of an even characteristic polynomial of degree
2n + 2 (n = polynomial degree of the preparation CDF). This module builds
that polynomial, finds and pairs its roots, constructs one mode per +- root
pair, and solves a dense (n + 2) x (n + 2) complex linear system for the
mode weights and the atom.

Numerical backbone:

* roots are found in the squared variable (degree n + 1), so the +- pairing
  is exact by construction, then Newton-polished on the full polynomial;
* every exponential is evaluated in an *anchored* form — the growing part of
  a mode is parametrized as exp(r*(x-1)) — so nothing overflows even when
  roots have large real parts (which near-degenerate inputs do produce);
* no quadrature anywhere: every integral reduces to the closed-form moment
  family of :func:`exp_weighted_moment`;
* the derivative-hierarchy weights and characteristic coefficients are
  assembled in exact rational arithmetic (they cancel catastrophically in
  floating point), and degrees above 12 run the entire assembly in extended
  precision — double precision loses ~log10(n!) digits there and visibly
  corrupts the density.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from ._exact import EXTENDED_DEGREE, exact_char, exact_nu, extended_assembly
from ._moments import anchored_moment_table, exp_weighted_moment, moment_table
from .distributions import ExponentialService, PolynomialCdf
from .errors import (
    ConvergenceFailure,
    DegenerateMode,
    IllConditioned,
    InputError,
    PairingFailure,
    PostconditionViolation,
    RepeatedRoot,
    SingularCoupling,
)

__all__ = [
    "CharacteristicSystem",
    "Mode",
    "WaitingTimeSolution",
    "exp_weighted_moment",
    "nu_coefficients",
    "characteristic_polynomial",
    "find_roots",
    "pair_roots",
    "mode_vector",
    "coupling_factor",
    "assemble_linear_system",
    "solve",
    "eval_waiting_density",
    "eval_waiting_cdf",
    "integral_equation_residual",
    "solution_summary",
]

#: Condition numbers above this trigger the IllConditioned warning.
ILL_CONDITIONED_THRESHOLD = 1e10

#: Relative gap below which two squared-variable roots count as repeated.
_REPEATED_ROOT_TOL = 1e-7

#: Grid used by the solution's structural self-checks.
_CHECK_GRID = 1025


@dataclass(frozen=True)
class CharacteristicSystem:
    """Derivative-hierarchy weights and the characteristic polynomial.

    ``nu[m]`` = mu * sum_i ((i + n - m)! / i!) * c_{i+n-m}; ``char_poly``
    holds ascending coefficients of the even degree-(2n+2) polynomial whose
    roots generate the density's exponential modes.
    """

    nu: tuple[float, ...]
    char_poly: tuple[float, ...]
    rate: float
    degree: int


@dataclass(frozen=True)
class Mode:
    """One +- root pair of the characteristic polynomial.

    ``root`` is the representative (the pair member with positive real part,
    or positive imaginary part on the imaginary axis). ``zeta``/``theta`` are
    the 2x2 mode-system components for the representative; ``partner_zeta``/
    ``partner_theta`` the same for the negated root. ``coupling`` ties the
    partner's weight to the representative's (partner weight = coupling *
    weight). ``anchored_weight`` = weight * exp(root) and ``anchored_coupling``
    = coupling * exp(-root) are the overflow-safe forms of those reported
    values; all four may degrade to inf when the coupling parametrization is
    singular (S vanishing at the root), and serialize as null then.

    Evaluation never uses the coupled form. The pair's density contribution
    is ``strength * (head*exp(root*(x-1)) + tail*exp(-root*x))`` with
    ``(head, tail)`` the balanced column built by :func:`_pair_coefficients`
    — finite for every root, including where the coupling diverges.
    """

    root: complex
    zeta: complex
    theta: complex
    partner_zeta: complex
    partner_theta: complex
    coupling: complex
    weight: complex
    anchored_weight: complex
    anchored_coupling: complex
    head: complex
    tail: complex
    strength: complex


@dataclass(frozen=True)
class WaitingTimeSolution:
    """Atom plus exponential-mode mixture: the steady-state law of W.

    ``modes`` holds the representative half of each root pair; evaluation
    expands both members. All invariants (normalization, realness,
    nonnegativity) are verified before construction completes.
    """

    pi0: float
    modes: tuple[Mode, ...]
    prep: PolynomialCdf
    service: ExponentialService
    condition_number: float

    @property
    def mu(self) -> float:
        return self.service.rate

    def density(self, x):
        return eval_waiting_density(self, x)

    def cdf(self, x):
        return eval_waiting_cdf(self, x)


def nu_coefficients(prep: PolynomialCdf, svc: ExponentialService) -> tuple[float, ...]:
    """Weights of the derivative hierarchy that closes the integral equation.

    nu[m] = mu * sum_{i=0}^{m} ((i + n - m)! / i!) * c_{i+n-m}, m = 0..n.
    Evaluated in exact rational arithmetic and rounded once: the terms
    alternate in sign with magnitudes up to n! * max|c|, so a floating-point
    accumulation loses roughly log10(n!) digits — total loss of significance
    well inside the supported degree range. Every input is a dyadic
    rational, which makes the exact path lossless and cheap. The top weight
    equals the rate exactly (its defining sum is the coefficient total,
    1 for every valid CDF).
    """
    return tuple(float(v) for v in exact_nu(prep.coeffs, svc.rate))


def characteristic_polynomial(
    nu: tuple[float, ...], svc: ExponentialService, n: int
) -> tuple[float, ...]:
    """Ascending coefficients of the even degree-(2n+2) root polynomial.

    The polynomial is r^{2n} (r^2 - mu^2) + (-1)^n * S(r) * S(-r) with
    S(r) = sum_{i<n} nu_i r^i, assembled in exact rational arithmetic (the
    inputs are dyadic rationals): the cross products cancel catastrophically
    in floating point at high degree. Evenness is then structural — for odd
    i + j the (i, j) and (j, i) cross terms carry opposite signs and cancel
    exactly — and the odd coefficients are still checked as an internal bug
    tripwire (AsymmetryDetected) before being returned as exact zeros.
    """
    nu_fr = [Fraction(v) for v in nu[: n + 1]]
    return tuple(float(v) for v in exact_char(nu_fr, svc.rate))


def _squared_roots(char_poly: tuple[float, ...]) -> np.ndarray:
    """Companion-matrix roots in the squared variable s = r^2, guard included.

    The coefficients are rescaled by a power of two (exact in floating
    point, roots unchanged) so the companion matrix stays well inside range
    even when high-degree coefficients grow huge. Raises RepeatedRoot if two
    squared roots lie within 1e-7 relative distance — the closed form
    assumes simple roots, and the doubled-root geometry also defeats the
    polish that follows.
    """
    even = np.asarray(char_poly[0::2], dtype=float)  # ascending in s = r^2
    even = even * np.exp2(-np.round(np.log2(np.max(np.abs(even)))))
    s_roots = np.roots(even[::-1])
    m = s_roots.size
    for i in range(m):
        for j in range(i + 1, m):
            gap = abs(s_roots[i] - s_roots[j])
            scale = max(abs(s_roots[i]), abs(s_roots[j]), 1e-300)
            if gap < _REPEATED_ROOT_TOL * scale:
                raise RepeatedRoot(
                    f"characteristic roots {s_roots[i]:.6g} and {s_roots[j]:.6g} "
                    f"(squared variable) are within relative distance "
                    f"{gap / scale:.2e} < {_REPEATED_ROOT_TOL:g}"
                )
    return s_roots


def _char_value_and_scale(char_poly, r: complex) -> tuple[complex, float]:
    """Polynomial value at r and the cancellation scale sum |a_k| |r|^k."""
    val = complex(0.0)
    scale = 0.0
    mag = abs(r)
    power = complex(1.0)
    pmag = 1.0
    for a in char_poly:
        val += a * power
        scale += abs(a) * pmag
        power *= r
        pmag *= mag
    return val, scale


def find_roots(char_poly: tuple[float, ...]) -> np.ndarray:
    """All 2n+2 roots of the even characteristic polynomial.

    Solved as a degree-(n+1) polynomial in the squared variable (companion-
    matrix eigenvalues), then square-rooted — which makes the root set
    exactly closed under negation — and Newton-polished on the original
    polynomial to relative residual < 1e-12.

    Raises
    ------
    RepeatedRoot
        If two squared-variable roots lie within 1e-7 relative distance:
        the closed form assumes simple roots.
    ConvergenceFailure
        If polishing cannot reach the required residual.
    """
    s_roots = _squared_roots(char_poly)
    reps = []
    dpoly = tuple(k * a for k, a in enumerate(char_poly))[1:]
    for s in s_roots:
        r = cmath.sqrt(complex(s))  # principal: Re >= 0; Im > 0 on the axis
        for _ in range(40):
            val, scale = _char_value_and_scale(char_poly, r)
            if abs(val) <= 1e-13 * scale:
                break
            dval, _ = _char_value_and_scale(dpoly, r)
            if dval == 0:
                break
            r -= val / dval
        val, scale = _char_value_and_scale(char_poly, r)
        if abs(val) > 1e-12 * scale:
            raise ConvergenceFailure(
                f"Newton polish stalled at residual {abs(val) / scale:.2e} "
                f"for root near {r:.6g}"
            )
        reps.append(r)
    return np.asarray(reps + [-r for r in reps])


def pair_roots(roots: np.ndarray) -> np.ndarray:
    """Deterministic ordering with partner symmetry.

    Representatives (first half) have positive real part, ties broken by
    positive imaginary part, sorted by descending real then imaginary part;
    entry i's partner sits at the mirrored index and is its exact negation.
    """
    roots = np.asarray(roots, dtype=complex)
    reps = [r for r in roots if r.real > 0.0 or (r.real == 0.0 and r.imag > 0.0)]
    if 2 * len(reps) != roots.size:
        raise PairingFailure(
            f"{len(reps)} representatives for {roots.size} roots; "
            f"the root set is not closed under negation"
        )
    for r in reps:
        gaps = np.abs(roots + r)
        if float(np.min(gaps)) > 1e-9 * max(abs(r), 1e-300):
            raise PairingFailure(f"root {r:.6g} lacks a negated partner")
    reps.sort(key=lambda r: (-r.real, -r.imag))
    return np.asarray(reps + [-r for r in reversed(reps)])


def _scaled_tail_sum(nu, r: complex, n: int) -> complex:
    """S(r) / r^n = sum_{i<n} nu_i r^{i-n}, stable for large |r|."""
    acc = complex(0.0)
    inv = 1.0 / r
    for i in range(n):  # Horner in u = 1/r: sum_i nu_i u^{n-i}, nu_0 innermost
        acc = (acc + nu[i]) * inv
    return acc


def _mode_rows(r: complex, nu, mu: float, n: int) -> np.ndarray:
    """The 2x2 homogeneous system a mode vector must solve, scale-balanced.

    Rows (before balancing): [r^{n+1} - mu r^n, -S(r)] and
    [-(-1)^{n+1} S(-r), r^{n+1} + mu r^n] acting on (zeta, theta). For
    |r| >= 1 both rows are divided by r^n, which keeps entries bounded for
    arbitrarily large roots.
    """
    sign = (-1.0) ** (n + 1)
    if abs(r) >= 1.0:
        s_p = _scaled_tail_sum(nu, r, n)
        s_m = _scaled_tail_sum(nu, -r, n) * (-1.0) ** n  # S(-r)/r^n
        return np.array(
            [[r - mu, -s_p], [-sign * s_m, r + mu]], dtype=complex
        )
    s_p = complex(np.polyval(list(reversed(nu[:n])), r)) if n else complex(0.0)
    s_m = complex(np.polyval(list(reversed(nu[:n])), -r)) if n else complex(0.0)
    rn = r**n
    return np.array(
        [[rn * (r - mu), -s_p], [-sign * s_m, rn * (r + mu)]], dtype=complex
    )


def _pair_coefficients(
    r: complex, nu: tuple[float, ...], mu: float, n: int
) -> tuple[complex, complex]:
    """Balanced coefficients (head, tail) of one pair's density column.

    The pair contributes head * exp(r*(x-1)) + tail * exp(-r*x), which spans
    the same direction as the coupled form zeta*exp(r*(x-1)) +
    qa*partner_zeta*exp(-r*x) — the identity qa*partner_zeta =
    zeta*r^n*(r-mu)/S(r) rescales one into the other — but is built without
    dividing by S(r), so it stays finite at roots where S vanishes and the
    coupling parametrization has a (removable) singularity. Normalized so the
    larger coefficient has magnitude 1.

    Raises
    ------
    DegenerateMode
        If both coefficients vanish (only possible at a root collapsing onto
        the origin, which the repeated-root guard rejects earlier).
    """
    if abs(r) >= 1.0:
        head = _scaled_tail_sum(nu, r, n)  # S(r) / r^n
        tail = r - mu
    else:
        head = complex(np.polyval(list(reversed(nu[:n])), r)) if n else complex(0.0)
        tail = r**n * (r - mu)
    scale = max(abs(head), abs(tail))
    if scale == 0.0 or not math.isfinite(scale):
        raise DegenerateMode(f"pair column vanished at root {r:.6g}")
    return head / scale, tail / scale


def mode_vector(
    r: complex, nu: tuple[float, ...], svc: ExponentialService, n: int
) -> tuple[complex, complex]:
    """Nontrivial (zeta, theta) solving the 2x2 mode system at a simple root.

    Normalized so the larger-magnitude component is exactly 1 (real,
    positive), which makes solutions reproducible regardless of root-finder
    ordering. Both rows are verified to residual < 1e-6 relative to the
    matrix scale.

    Raises
    ------
    DegenerateMode
        If the system has no one-dimensional nullspace (both rows vanish)
        — the signature of a repeated root that slipped through.
    """
    return _null_vector(_mode_rows(r, nu, svc.rate, n), complex(r))


def _null_vector(rows: np.ndarray, label: complex) -> tuple[complex, complex]:
    """Normalized nullspace vector of a 2x2 system, with residual check.

    Shared by both assembly pipelines (the extended-precision path hands in
    rows it computed at working precision and rounded). ``label`` only
    decorates error messages.
    """
    scale = float(np.max(np.abs(rows)))
    if scale == 0.0 or not math.isfinite(scale):
        raise DegenerateMode(f"mode system vanished identically at root {label:.6g}")
    _, svals, vh = np.linalg.svd(rows / scale)
    if svals[0] < 1e-13:
        raise DegenerateMode(f"mode system vanished identically at root {label:.6g}")
    vec = vh[-1].conj()
    idx = int(np.argmax(np.abs(vec)))
    vec = vec / vec[idx]
    zeta, theta = complex(vec[0]), complex(vec[1])
    vnorm = max(abs(zeta), abs(theta))
    # residuals are judged against the matrix scale, not per-row norms: at a
    # near-zero root one row is catastrophically cancelled (its true entries
    # are ~1e-50) and its computed norm is pure noise, while the null vector
    # from the accurate row is still correct. Genuine degeneracy — a repeated
    # root that slipped through — shows up at ~1e-2 relative to the matrix.
    for row in rows:
        resid = abs(row[0] * zeta + row[1] * theta)
        if resid > 1e-6 * scale * vnorm:
            raise DegenerateMode(
                f"mode vector residual {resid / (scale * vnorm):.2e} at root {label:.6g}"
            )
    return zeta, theta


def coupling_factor(
    r: complex,
    zeta: complex,
    partner_zeta: complex,
    nu: tuple[float, ...],
    svc: ExponentialService,
    n: int,
) -> tuple[complex, complex]:
    """Weight ratio tying a partner mode to its representative.

    Returns ``(coupling, anchored_coupling)`` where the partner's weight is
    coupling * representative weight and anchored_coupling = coupling *
    exp(-root) is the bounded form used internally:

        anchored_coupling = zeta * (r - mu) / (partner_zeta * S(r)/r^n).

    Raises
    ------
    SingularCoupling
        If S(r) vanishes at the root relative to its term scale — the
        closed-form construction assumes it nonzero.
    """
    mu = svc.rate
    if abs(r) >= 1.0:
        # denominator expressed as S(r)/r^n so nothing overflows
        s_val = _scaled_tail_sum(nu, r, n)
        s_scale = sum(abs(nu[i]) * abs(r) ** (i - n) for i in range(n))
        numerator = zeta * (r - mu)
    else:
        s_val = complex(np.polyval(list(reversed(nu[:n])), r))
        s_scale = sum(abs(nu[i]) * abs(r) ** i for i in range(n))
        numerator = zeta * r**n * (r - mu)
    if abs(s_val) < 1e-12 * max(s_scale, 1e-300):
        raise SingularCoupling(
            f"coupling denominator vanished at root {r:.6g} "
            f"(|S(r)| = {abs(s_val):.2e}, scale {s_scale:.2e})"
        )
    anchored = numerator / (partner_zeta * s_val)
    coupling = anchored * cmath.exp(r) if r.real <= 709.0 else complex(math.inf)
    return coupling, anchored


def _basis_tables(basis, n: int):
    """Per-mode endpoint derivatives and moments, in anchored form.

    For mode j with root r and balanced column coefficients (head, tail),
    the strength-coefficient function is

        g_j(x) = head * exp(r*(x-1)) + tail * exp(-r*x),

    bounded by construction. Returns, for each mode: derivative values
    g_j^{(m)}(0) and g_j^{(m)}(1) for m = 0..n, moments int_0^1 y^k g_j dy
    for k = 0..n, and the total integral int_0^1 g_j dy.
    """
    at0 = np.empty((len(basis), n + 1), dtype=complex)
    at1 = np.empty((len(basis), n + 1), dtype=complex)
    mom = np.empty((len(basis), n + 1), dtype=complex)
    integral = np.empty(len(basis), dtype=complex)
    for j, (r, head, tail) in enumerate(basis):
        emr = cmath.exp(-r)
        plus = anchored_moment_table(n, r)
        minus = moment_table(n, -r)
        rpow = complex(1.0)  # r^m
        npow = complex(1.0)  # (-r)^m
        for m in range(n + 1):
            at0[j, m] = head * rpow * emr + tail * npow
            at1[j, m] = head * rpow + tail * npow * emr
            mom[j, m] = head * plus[m] + tail * minus[m]
            rpow *= r
            npow *= -r
        # both pair members integrate to the same closed form
        integral[j] = (head + tail) * (1.0 - emr) / r
    return at0, at1, mom, integral


def _equilibrate(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-sided power-of-two row/column equilibration of a square system.

    The derivative-hierarchy rows scale like root^level (up to ~1e29 at high
    degree) while the balance and normalization rows are O(1); the raw
    condition number then reflects scaling, not genuine near-degeneracy, and
    the factorization loses digits it does not need to lose. Scale factors
    are rounded to powers of two, so applying them is exact in floating
    point and the scaled system is equivalent bit-for-bit.

    Returns ``(scaled, row_scale, col_scale)`` with
    ``scaled = diag(row_scale) @ mat @ diag(col_scale)``; a solution ``y`` of
    the scaled system maps back as ``x = col_scale * y``.
    """
    scaled = mat.copy()
    rows = np.ones(mat.shape[0])
    cols = np.ones(mat.shape[1])
    for _ in range(4):
        rmax = np.max(np.abs(scaled), axis=1)
        rf = np.exp2(-np.round(np.log2(np.where(rmax > 0.0, rmax, 1.0))))
        scaled *= rf[:, None]
        rows *= rf
        cmax = np.max(np.abs(scaled), axis=0)
        cf = np.exp2(-np.round(np.log2(np.where(cmax > 0.0, cmax, 1.0))))
        scaled *= cf[None, :]
        cols *= cf
    return scaled, rows, cols


def assemble_linear_system(
    basis, prep: PolynomialCdf, svc: ExponentialService
) -> tuple[np.ndarray, np.ndarray]:
    """Dense complex system for the mode strengths and the atom.

    Unknowns are (u_1..u_{n+1}, pi0) where u_j is mode j's strength (the
    multiplier of its balanced pair column).
    Row 0 pins the density value at 0 to the atom's throughput balance; rows
    1..n pin the derivative hierarchy at 0 (each involving derivative values
    at 1 and moment integrals, all in closed form); the final row is the
    normalization atom + integral of the density = 1.
    """
    c = prep.coeffs
    n = prep.degree
    mu = svc.rate
    nu = nu_coefficients(prep, svc)
    at0, at1, mom, integral = _basis_tables(basis, n)
    nmodes = len(basis)
    mat = np.zeros((nmodes + 1, nmodes + 1), dtype=complex)
    rhs = np.zeros(nmodes + 1, dtype=complex)

    # Row 0: g(0) + mu * sum_k c_k * Mom_k - mu*(1 - c_0)*pi0 = 0.
    for j in range(nmodes):
        mat[0, j] = at0[j, 0] + mu * sum(c[k] * mom[j, k] for k in range(n + 1))
    mat[0, nmodes] = -mu * (1.0 - c[0])
    # Rows l = 1..n: the derivative hierarchy at 0.
    for ell in range(1, n + 1):
        for j in range(nmodes):
            entry = at0[j, ell] - mu * at0[j, ell - 1]
            entry += mu * (-1.0) ** (ell - 1) * at1[j, ell - 1]
            ratio = float(math.factorial(ell))  # (i + ell)!/i! at i = 0
            acc = complex(0.0)
            for i in range(n - ell + 1):
                if i > 0:
                    ratio *= (i + ell) / i
                acc += ratio * c[i + ell] * mom[j, i]
            entry += mu * acc
            for jj in range(ell):
                entry -= nu[n - jj] * (-1.0) ** (ell - 1 - jj) * at1[j, ell - 1 - jj]
            mat[ell, j] = entry
        mat[ell, nmodes] = mu * math.factorial(ell) * c[ell]
    # Final row: normalization.
    mat[nmodes, :nmodes] = integral
    mat[nmodes, nmodes] = 1.0
    rhs[nmodes] = 1.0
    return mat, rhs


def _verify_structure(cs: CharacteristicSystem, roots: np.ndarray) -> None:
    """Structural invariants asserted on every solve."""
    if abs(cs.nu[-1] - cs.rate) > 1e-12 * cs.rate:
        raise PostconditionViolation("top_weight", f"nu_n = {cs.nu[-1]!r} != rate")
    if any(cs.char_poly[1::2]):
        raise PostconditionViolation("even_polynomial", "odd coefficients nonzero")
    # multiset closed under negation (exact) and conjugation (within 1e-10)
    neg = np.sort_complex(-roots)
    conj = np.sort_complex(np.conj(roots))
    original = np.sort_complex(roots)
    if not np.array_equal(original, neg):
        raise PostconditionViolation("negation_closure", "root multiset not symmetric")
    scale = float(np.max(np.abs(roots)))
    if float(np.max(np.abs(original - conj))) > 1e-10 * max(scale, 1.0):
        raise PostconditionViolation("conjugation_closure", "roots not conjugate-paired")


def solve(prep: PolynomialCdf, svc: ExponentialService) -> WaitingTimeSolution:
    """Compute the exact steady-state waiting-time law.

    Orchestrates the full closed-form pipeline (weights, characteristic
    polynomial, roots, pairing, mode vectors, couplings, linear system) and
    verifies every structural invariant before returning. Up to degree 12
    everything runs in equilibrated double precision with one step of
    iterative refinement; above that the assembly cancellation outgrows
    double precision and the same pipeline runs in exact rational /
    extended-precision arithmetic, rounded to double on output.

    Raises
    ------
    RepeatedRoot, ConvergenceFailure, DegenerateMode
        Propagated from the corresponding stages. A singular coupling is NOT
        an error here: the balanced pair columns avoid the division by S(r),
        so such solves succeed, with the coupled-form report fields (weight,
        coupling) degrading to inf.
    PostconditionViolation
        If the assembled solution violates a structural invariant
        (normalization, realness, nonnegativity, root symmetry).

    Warns
    -----
    IllConditioned
        When the equilibrated linear system's condition number exceeds 1e10;
        the solution is still returned, with the condition number recorded.
    """
    if prep.degree < 1:
        raise InputError("preparation CDF must have degree >= 1 (degenerate B == 0)")
    n = prep.degree
    mu = svc.rate
    if n > EXTENDED_DEGREE:
        # the weight sums, characteristic cross products and row assembly
        # cancel to ~log10(n!) digits; past the measured cliff the whole
        # assembly (and the linear solve) runs in exact/extended precision
        # and is rounded to double once, here
        ext = extended_assembly(
            prep, svc, _squared_roots, pair_roots, _null_vector, _equilibrate
        )
        cs = CharacteristicSystem(
            nu=ext.nu, char_poly=ext.char_poly, rate=mu, degree=n
        )
        ordered = ext.ordered_roots
        _verify_structure(cs, ordered)
        basis = ext.basis
        vectors = ext.vectors
        couplings = [
            qq if qq is not None else (complex(math.inf, 0.0), complex(math.inf, 0.0))
            for qq in ext.couplings
        ]
        sol = ext.solution
        cond = ext.condition_number
    else:
        nu = nu_coefficients(prep, svc)
        char = characteristic_polynomial(nu, svc, n)
        cs = CharacteristicSystem(nu=nu, char_poly=char, rate=mu, degree=n)
        ordered = pair_roots(find_roots(char))
        _verify_structure(cs, ordered)
        reps = ordered[: n + 1]
        partners = ordered[n + 1 :]

        basis = []
        couplings = []
        vectors = []
        for i, r in enumerate(reps):
            zeta, theta = mode_vector(r, nu, svc, n)
            pzeta, ptheta = mode_vector(
                complex(partners[len(partners) - 1 - i]), nu, svc, n
            )
            try:
                q, qa = coupling_factor(r, zeta, pzeta, nu, svc, n)
            except SingularCoupling:
                # reporting parametrization diverges (S(r) ~ 0); the solve
                # itself proceeds on the balanced columns, which have no such
                # singularity
                q = qa = complex(math.inf, 0.0)
            basis.append((complex(r),) + _pair_coefficients(complex(r), nu, mu, n))
            couplings.append((q, qa))
            vectors.append((zeta, theta, pzeta, ptheta))

        mat, rhs = assemble_linear_system(basis, prep, svc)
        scaled, row_scale, col_scale = _equilibrate(mat)
        cond = float(np.linalg.cond(scaled))
        b = rhs * row_scale
        y = np.linalg.solve(scaled, b)
        y += np.linalg.solve(scaled, b - scaled @ y)  # one refinement step
        sol = y * col_scale

    if cond > ILL_CONDITIONED_THRESHOLD:
        warnings.warn(
            f"mode system condition number {cond:.3e} exceeds "
            f"{ILL_CONDITIONED_THRESHOLD:g} even after equilibration; "
            f"double-precision evaluation of the returned modes may amplify "
            f"rounding error",
            IllConditioned,
            stacklevel=2,
        )

    pi0_raw = complex(sol[-1])
    modes = []
    for i, (r, head, tail) in enumerate(basis):
        strength = complex(sol[i])
        zeta, theta, pzeta, ptheta = vectors[i]
        q, qa = couplings[i]
        if cmath.isfinite(q) and zeta != 0.0:
            # convert to the coupled parametrization for reporting:
            # strength * head = anchored_weight * zeta
            anchored_weight = strength * head / zeta
            weight = anchored_weight * cmath.exp(-r)
        else:
            anchored_weight = weight = complex(math.inf, 0.0)
        modes.append(
            Mode(
                root=r,
                zeta=zeta,
                theta=theta,
                partner_zeta=pzeta,
                partner_theta=ptheta,
                coupling=q,
                weight=weight,
                anchored_weight=anchored_weight,
                anchored_coupling=qa,
                head=head,
                tail=tail,
                strength=strength,
            )
        )

    solution = WaitingTimeSolution(
        pi0=pi0_raw.real,
        modes=tuple(modes),
        prep=prep,
        service=svc,
        condition_number=cond,
    )
    _verify_solution(solution, pi0_raw)
    return solution


def _mode_terms(sol: WaitingTimeSolution, x: np.ndarray) -> np.ndarray:
    """Complex density values sum_j u_j g_j(x) on an array (no realness cut)."""
    total = np.zeros(x.shape, dtype=complex)
    for m in sol.modes:
        r = m.root
        total += m.strength * (
            m.head * np.exp(r * (x - 1.0)) + m.tail * np.exp(-r * x)
        )
    return total


def _cdf_terms(sol: WaitingTimeSolution, x: np.ndarray) -> np.ndarray:
    """Complex CDF values pi0 + sum_j u_j int_0^x g_j on an array."""
    total = np.full(x.shape, complex(sol.pi0))
    for m in sol.modes:
        r = m.root
        emr = cmath.exp(-r)
        total += (m.strength / r) * (
            m.head * (np.exp(r * (x - 1.0)) - emr)
            + m.tail * (1.0 - np.exp(-r * x))
        )
    return total


def _verify_solution(sol: WaitingTimeSolution, pi0_raw: complex) -> None:
    if abs(pi0_raw.imag) > 1e-8:
        raise PostconditionViolation("atom_real", f"Im(pi0) = {pi0_raw.imag:.3e}")
    if not -1e-10 <= sol.pi0 <= 1.0 + 1e-10:
        raise PostconditionViolation("atom_range", f"pi0 = {sol.pi0!r} outside [0, 1]")
    total = complex(sol.pi0)
    for m in sol.modes:
        total += (
            m.strength
            * (m.head + m.tail)
            * (1.0 - cmath.exp(-m.root))
            / m.root
        )
    if abs(total - 1.0) > 1e-10:
        raise PostconditionViolation(
            "normalization", f"atom + integral = {total!r}, defect {abs(total - 1.0):.3e}"
        )
    xs = np.linspace(0.0, 1.0, _CHECK_GRID)
    vals = _mode_terms(sol, xs)
    worst_imag = float(np.max(np.abs(vals.imag)))
    if worst_imag > 1e-8:
        raise PostconditionViolation("density_real", f"max |Im f| = {worst_imag:.3e}")
    worst_neg = float(np.min(vals.real))
    if worst_neg < -1e-8:
        raise PostconditionViolation("density_nonnegative", f"min f = {worst_neg:.3e}")


def eval_waiting_density(sol: WaitingTimeSolution, x):
    """Waiting-time density on (0, 1] (the atom at 0 is not included).

    The imaginary residue of the mode sum is asserted below 1e-8 and
    discarded.
    """
    scalar = not isinstance(x, np.ndarray)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((xs <= 0.0) | (xs > 1.0)):
        raise ValueError(
            "waiting-time density is defined on (0, 1]; the mass at 0 is the atom pi0"
        )
    vals = _mode_terms(sol, xs)
    worst = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    if worst > 1e-8:
        raise PostconditionViolation("density_real", f"max |Im f| = {worst:.3e}")
    out = vals.real
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def eval_waiting_cdf(sol: WaitingTimeSolution, x):
    """Waiting-time CDF: 0 below 0, atom + mode integrals on [0, 1], 1 above."""
    scalar = not isinstance(x, np.ndarray)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    inside = np.clip(xs, 0.0, 1.0)
    vals = _cdf_terms(sol, inside)
    worst = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    if worst > 1e-8:
        raise PostconditionViolation("cdf_real", f"max |Im F| = {worst:.3e}")
    # at exactly 1 the computed value (1 within 1e-10 by normalization) is
    # returned rather than clamped, so the endpoint stays a real check
    out = np.where(xs < 0.0, 0.0, np.where(xs > 1.0, 1.0, vals.real))
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def integral_equation_residual(
    sol: WaitingTimeSolution, prep: PolynomialCdf, svc: ExponentialService, points
) -> float:
    """Largest defect of the stationary integral equation at the points.

    Every integral of a mode exponential over [0, 1-x] and [1-x, 1] is in
    closed form (shifted moment tables) — no quadrature — so this is an
    independent re-derivation check, not a smoke test: perturbing any mode
    weight by 1% moves the result above 1e-4.
    """
    c = prep.coeffs
    n = prep.degree
    mu = svc.rate
    worst = 0.0
    for x in np.atleast_1d(np.asarray(points, dtype=float)):
        b = 1.0 - x
        fx = complex(_mode_terms(sol, np.array([x]))[0])
        capf = complex(_cdf_terms(sol, np.array([x]))[0])
        fb = float(np.polyval(list(reversed(c)), x))
        partial = np.zeros(n + 1, dtype=complex)  # int_0^b y^k f(y) dy
        total = complex(0.0)  # int_0^1 f(y) dy
        for m in sol.modes:
            r = m.root
            u = m.strength
            emr = cmath.exp(-r)
            if b > 0.0:
                plus = anchored_moment_table(n, r * b)
                minus = moment_table(n, -r * b)
                shift = cmath.exp(r * (b - 1.0))
                bpow = b
                for k in range(n + 1):
                    partial[k] += u * bpow * (
                        m.head * shift * plus[k] + m.tail * minus[k]
                    )
                    bpow *= b
            total += u * (m.head + m.tail) * (1.0 - emr) / r
        tail = total - partial[0]
        double = complex(0.0)
        for i in range(n + 1):
            if c[i] == 0.0:
                continue
            for k in range(i + 1):
                double += c[i] * comb(i, k) * x ** (i - k) * partial[k]
        resid = fx - mu * capf + mu * sol.pi0 * fb + mu * double + mu * tail
        worst = max(worst, abs(resid))
    return worst


def _json_complex(z: complex):
    def num(v: float):
        return v if math.isfinite(v) else None

    return {"re": num(z.real), "im": num(z.imag)}


def solution_summary(sol: WaitingTimeSolution) -> dict:
    """The solution as a JSON-ready dict (the CLI's wire format).

    Roots/zetas/ds list both members of every pair (representatives first,
    then their negations in mirrored order) so the density is reconstructible
    directly as sum d * zeta * exp(root * x); qs has one entry per pair.
    Values that overflow double precision serialize as null.
    """
    reps = sol.modes
    roots = [m.root for m in reps] + [-m.root for m in reversed(reps)]
    zetas = [m.zeta for m in reps] + [m.partner_zeta for m in reversed(reps)]
    ds = [m.weight for m in reps] + [
        m.anchored_weight * m.anchored_coupling for m in reversed(reps)
    ]
    return {
        "pi0": sol.pi0,
        "mu": sol.mu,
        "coeffs": list(sol.prep.coeffs),
        "roots": [_json_complex(r) for r in roots],
        "zetas": [_json_complex(z) for z in zetas],
        "qs": [_json_complex(m.coupling) for m in reps],
        "ds": [_json_complex(d) for d in ds],
        "condition_number": sol.condition_number,
    }
