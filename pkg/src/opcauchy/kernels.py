"""Closed-form solution assembly, evaluated per Fourier mode.

Every operator here is a function of the spatial operator alone, so on a
periodic grid the whole construction reduces to scalar calculus in the
symbol p.  The homogeneous part applies time derivatives analytically
through a small term calculus (``TermList``): each term is either
c * t^alpha * integral_0^t tau^beta K(tau) dtau or a boundary term
c * t^alpha * K^(d)(t), and d/dt maps the set into itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .errors import UnresolvedKernel
from .multiplier import (
    Field,
    SpectralField,
    _sat_exp,
    cosh_sqrt,
    from_spectral,
    mesh,
    sinhc_sqrt,
    to_spectral,
    OVERFLOW_LIMIT,
)
from .quadrature import gauss_rule
from .symbol_poly import CharacteristicSpec, Kind, SymbolPolynomial, symbol_grid, wavevectors

PLAIN_MEASURE = "plain"
TAU_PRIME_MEASURE = "tau_prime"

_repeated_root_measure = None


def set_repeated_root_measure(measure):
    """Select the repeated-root forcing measure ('plain', 'tau_prime', None)."""
    global _repeated_root_measure
    if measure not in (None, PLAIN_MEASURE, TAU_PRIME_MEASURE):
        raise ValueError(f"unknown measure {measure!r}")
    _repeated_root_measure = measure


def get_repeated_root_measure():
    return _repeated_root_measure


def double_factorial(n):
    """n!! with the convention 0!! = (-1)!! = 1."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


# ---------------------------------------------------------------------------
# Term calculus


@dataclass(frozen=True)
class IntegralTerm:
    coeff: Fraction
    t_pow: int
    tau_pow: int
    kernel: int = 0


@dataclass(frozen=True)
class BoundaryTerm:
    coeff: Fraction
    t_pow: int
    kernel: int = 0
    deriv: int = 0


@dataclass(frozen=True)
class TermList:
    integrals: tuple = ()
    boundaries: tuple = ()


def _combine(integrals, boundaries):
    acc_i = {}
    for term in integrals:
        key = (term.t_pow, term.tau_pow, term.kernel)
        acc_i[key] = acc_i.get(key, Fraction(0)) + term.coeff
    acc_b = {}
    for term in boundaries:
        key = (term.t_pow, term.kernel, term.deriv)
        acc_b[key] = acc_b.get(key, Fraction(0)) + term.coeff
    ints = tuple(
        IntegralTerm(c, a, b, k) for (a, b, k), c in sorted(acc_i.items()) if c != 0
    )
    bnds = tuple(
        BoundaryTerm(c, a, k, d) for (a, k, d), c in sorted(acc_b.items()) if c != 0
    )
    return TermList(ints, bnds)


def derivative_reduce(terms: TermList, order: int) -> TermList:
    """Apply d/dt `order` times, exactly.

    d/dt [t^a int_0^t tau^b K] = a t^{a-1} int tau^b K + t^{a+b} K(t);
    boundary terms follow the product rule with a K-derivative increment.
    Like terms are combined with exact rational coefficients, so the
    cancellations the closed forms rely on are exact.
    """
    for _ in range(order):
        ints, bnds = [], []
        for term in terms.integrals:
            if term.t_pow > 0:
                ints.append(
                    IntegralTerm(term.coeff * term.t_pow, term.t_pow - 1, term.tau_pow, term.kernel)
                )
            bnds.append(BoundaryTerm(term.coeff, term.t_pow + term.tau_pow, term.kernel, 0))
        for term in terms.boundaries:
            if term.t_pow > 0:
                bnds.append(
                    BoundaryTerm(term.coeff * term.t_pow, term.t_pow - 1, term.kernel, term.deriv)
                )
            bnds.append(BoundaryTerm(term.coeff, term.t_pow, term.kernel, term.deriv + 1))
        terms = _combine(ints, bnds)
    return terms


@lru_cache(maxsize=None)
def _g_termlist(kind: Kind, m: int) -> TermList:
    """Base term list of the impulse-response kernel G for each problem kind."""
    terms = []
    if kind is Kind.FIRST_ORDER_PRODUCT:
        pw = m - 2
        denom = factorial(pw)
        for i in range(pw + 1):
            c = Fraction(comb(pw, i) * (-1) ** i, denom)
            terms.append(IntegralTerm(c, pw - i, i))
    elif kind is Kind.EVEN_ORDER_PRODUCT:
        pw = 2 * m - 3
        denom = factorial(pw)
        for i in range(pw + 1):
            c = Fraction(comb(pw, i) * (-1) ** i, denom)
            terms.append(IntegralTerm(c, pw - i, i))
    else:
        pw = m - 2
        denom = double_factorial(2 * m - 2) * double_factorial(2 * m - 4)
        for i in range(pw + 1):
            c = Fraction(comb(pw, i) * (-1) ** i, denom)
            terms.append(IntegralTerm(c, 2 * (pw - i), 2 * i + 1))
    return _combine(terms, ())


@lru_cache(maxsize=None)
def _reduced_g(kind: Kind, m: int, order: int) -> TermList:
    return derivative_reduce(_g_termlist(kind, m), order)


# ---------------------------------------------------------------------------
# Scalar kernels K(tau) and their derivatives


def _sinh_pair(w2, tau, d):
    """d-th derivative of sinh(tau w)/w as an even function of w (w2 = w^2)."""
    half, odd = divmod(d, 2)
    fac = w2**half if half else 1.0
    if odd == 0:
        return fac * tau * sinhc_sqrt(tau * tau * w2)
    return fac * cosh_sqrt(tau * tau * w2)


def _kernel_deriv(spec: CharacteristicSpec, p, tau, d=0):
    """K^(d)(tau) for the kind's scalar kernel, broadcastable in tau and p."""
    p = np.asarray(p, dtype=complex)
    if spec.kind is Kind.FIRST_ORDER_PRODUCT:
        total = 0.0
        for cj, aj in zip(spec.pf, spec.roots):
            lam = aj * p
            total = total + cj * (lam**d if d else 1.0) * _sat_exp(tau * lam)
        return total
    if spec.kind is Kind.EVEN_ORDER_PRODUCT:
        total = 0.0
        for dj, aj in zip(spec.pf, spec.roots):
            total = total + dj * _sinh_pair(aj * aj * p, tau, d)
        return total
    return _sinh_pair(p, tau, d)


# ---------------------------------------------------------------------------
# Kernel operators


def gm_first(spec, p, t, nodes=64):
    """G_m(p, t) = int_0^t (t-tau)^{m-2}/(m-2)! sum_j c_j e^{tau a_j p} dtau."""
    if spec.kind is not Kind.FIRST_ORDER_PRODUCT or spec.m < 2:
        raise ValueError("gm_first needs a first-order product with m >= 2")
    tau, w = gauss_rule(nodes, t)
    p = np.asarray(p, dtype=complex)
    tau_b = tau.reshape((-1,) + (1,) * p.ndim)
    w_b = w.reshape((-1,) + (1,) * p.ndim)
    kern = (t - tau_b) ** (spec.m - 2) / factorial(spec.m - 2)
    vals = _kernel_deriv(spec, p, tau_b)
    out = np.sum(w_b * kern * vals, axis=0)
    return complex(out) if p.ndim == 0 else out


def gm_even(spec, p, t, nodes=64):
    """Even-order G_m with the sinh kernel in place of the exponential."""
    if spec.kind is not Kind.EVEN_ORDER_PRODUCT or spec.m < 2:
        raise ValueError("gm_even needs an even-order product with m >= 2")
    tau, w = gauss_rule(nodes, t)
    p = np.asarray(p, dtype=complex)
    tau_b = tau.reshape((-1,) + (1,) * p.ndim)
    w_b = w.reshape((-1,) + (1,) * p.ndim)
    kern = (t - tau_b) ** (2 * spec.m - 3) / factorial(2 * spec.m - 3)
    vals = _kernel_deriv(spec, p, tau_b)
    out = np.sum(w_b * kern * vals, axis=0)
    return complex(out) if p.ndim == 0 else out


def _resolve_measure(spec, measure):
    if spec.kind is not Kind.REPEATED_ROOT:
        return None
    measure = measure or _repeated_root_measure
    if measure is None:
        raise UnresolvedKernel(
            "repeated-root forcing measure unresolved: run the kernel discrepancy "
            "probe (CLI mode 'probe') or set it explicitly"
        )
    return measure


def inhomogeneous_mode(spec, p, fhat, t, nodes=64, measure=None):
    """Forced part of the mode solution: the nested double time integral.

    ``fhat`` is a callable tau -> forcing coefficient (scalar or an array
    broadcastable with p).  For the repeated-root kind the tau'-measure must
    have been resolved by the discrepancy probe (or passed explicitly).
    """
    if t == 0:
        p_arr = np.asarray(p, dtype=complex)
        return 0j if p_arr.ndim == 0 else np.zeros(p_arr.shape, complex)
    measure = _resolve_measure(spec, measure)
    p_arr = np.asarray(p, dtype=complex)
    m = spec.m
    tau_o, w_o = gauss_rule(nodes, t)
    total = np.zeros(p_arr.shape, dtype=complex)
    if spec.kind is Kind.FIRST_ORDER_PRODUCT:
        pw, denom = m - 2, factorial(m - 2)
    elif spec.kind is Kind.EVEN_ORDER_PRODUCT:
        pw, denom = 2 * m - 3, factorial(2 * m - 3)
    else:
        pw = m - 2
        denom = double_factorial(2 * m - 2) * double_factorial(2 * m - 4)
    for to, wo in zip(tau_o, w_o):
        rem = t - to
        tp, wp = gauss_rule(nodes, rem)
        tp_b = tp.reshape((-1,) + (1,) * p_arr.ndim)
        wp_b = wp.reshape((-1,) + (1,) * p_arr.ndim)
        if spec.kind is Kind.REPEATED_ROOT:
            kern = (rem * rem - tp_b * tp_b) ** pw / denom
            if measure == TAU_PRIME_MEASURE:
                kern = kern * tp_b
        else:
            kern = (rem - tp_b) ** pw / denom
        inner = np.sum(wp_b * kern * _kernel_deriv(spec, p_arr, tp_b), axis=0)
        total = total + wo * inner * fhat(to)
    if spec.kind is Kind.FIRST_ORDER_PRODUCT:
        total = total / spec.lead
    return complex(total) if p_arr.ndim == 0 else total


def _homogeneous_pairs(spec):
    """(coefficient index k, data index r, derivative order) triples."""
    pairs = []
    if spec.kind is Kind.FIRST_ORDER_PRODUCT:
        for k in range(1, spec.m + 1):
            for r in range(k):
                pairs.append((k, r, k - 1 - r))
    else:
        for k in range(1, spec.m + 1):
            for r in range(2 * k):
                pairs.append((k, r, 2 * k - 1 - r))
    return pairs


def _eval_termlist(terms, spec, p, t, tau, w, kvals, moment_cache, bderiv_cache):
    out = np.zeros(np.shape(p), dtype=complex)
    for term in terms.integrals:
        beta = term.tau_pow
        if beta not in moment_cache:
            tau_b = tau.reshape((-1,) + (1,) * np.ndim(p))
            w_b = w.reshape((-1,) + (1,) * np.ndim(p))
            moment_cache[beta] = np.sum(w_b * tau_b**beta * kvals, axis=0)
        out = out + float(term.coeff) * t**term.t_pow * moment_cache[beta]
    for term in terms.boundaries:
        if term.deriv not in bderiv_cache:
            bderiv_cache[term.deriv] = _kernel_deriv(spec, p, t, term.deriv)
        out = out + float(term.coeff) * t**term.t_pow * bderiv_cache[term.deriv]
    return out


def homogeneous_mode(spec, p, phihat, t, nodes=64):
    """Initial-data part of the mode solution.

    Assembles sum_k b_k p^{m-k} sum_r d^{q}/dt^{q} [G](t) phihat_r with the
    derivatives taken analytically via the term calculus.
    """
    if len(phihat) != spec.data_count:
        raise ValueError(f"expected {spec.data_count} initial coefficients")
    if spec.m < 2:
        raise ValueError("closed-form homogeneous path needs m >= 2")
    p_arr = np.asarray(p, dtype=complex)
    tau, w = gauss_rule(nodes, t)
    tau_b = tau.reshape((-1,) + (1,) * p_arr.ndim)
    kvals = _kernel_deriv(spec, p_arr, tau_b)
    moment_cache, bderiv_cache = {}, {}
    acc = np.zeros(p_arr.shape, dtype=complex)
    for k, r, order in _homogeneous_pairs(spec):
        phi = phihat[r]
        if np.isscalar(phi) and phi == 0:
            continue
        terms = _reduced_g(spec.kind, spec.m, order)
        val = _eval_termlist(
            terms, spec, p_arr, t, tau, w, kvals, moment_cache, bderiv_cache
        )
        acc = acc + spec.b[k] * p_arr ** (spec.m - k) * val * phi
    acc = acc / spec.lead
    return complex(acc) if p_arr.ndim == 0 else acc


# ---------------------------------------------------------------------------
# Full-grid problems


@dataclass(frozen=True, eq=False)
class CauchyProblem:
    """A periodic-grid Cauchy problem for one of the three operator kinds.

    ``forcing`` is a callable (mesh arrays..., t) -> samples, or None.
    """

    spec: CharacteristicSpec
    P: SymbolPolynomial
    shape: tuple
    box: tuple
    phi: tuple
    forcing: object = None
    t_points: tuple = ()

    def __post_init__(self):
        if len(self.phi) != self.spec.data_count:
            raise ValueError(
                f"kind {self.spec.kind.value} with m={self.spec.m} needs "
                f"{self.spec.data_count} initial fields, got {len(self.phi)}"
            )
        for f in self.phi:
            if f.shape != tuple(self.shape) or f.box != tuple(self.box):
                raise ValueError("all initial fields must share the problem grid")
        if list(self.t_points) != sorted(self.t_points) or any(
            t < 0 for t in self.t_points
        ):
            raise ValueError("t_points must be increasing and nonnegative")


@dataclass(frozen=True)
class StabilityReport:
    """Growth diagnostics of a solve: nothing here aborts a run."""

    max_growth: tuple  # per root, max over the grid of Re(a_j p(k))
    overflowed: tuple  # integer wavevectors whose modes saturated
    condition: float  # max |partial-fraction weight|


def _growth_rates(spec, pgrid):
    """Re(lambda) of the fastest-growing mode eigenvalue, per root."""
    if spec.kind is Kind.FIRST_ORDER_PRODUCT:
        return [np.real(a * pgrid) for a in spec.roots]
    if spec.kind is Kind.EVEN_ORDER_PRODUCT:
        return [np.abs(np.real(a * np.sqrt(pgrid.astype(complex)))) for a in spec.roots]
    return [np.abs(np.real(np.sqrt(pgrid.astype(complex))))]


def stability_report(spec, pgrid, shape, t_max):
    rates = _growth_rates(spec, pgrid)
    kmesh = wavevectors(shape)
    over = np.zeros(pgrid.shape, dtype=bool)
    for rate in rates:
        over |= rate * t_max > OVERFLOW_LIMIT
    flagged = tuple(
        tuple(int(kmesh[d][tuple(i)]) for d in range(len(shape)))
        for i in np.argwhere(over)
    )
    cond = max((abs(c) for c in spec.pf), default=1.0)
    return StabilityReport(
        max_growth=tuple(float(np.max(r)) for r in rates),
        overflowed=flagged,
        condition=float(cond),
    )


def _duhamel_first_order(spec, pgrid, phihat0, fhat, t, nodes):
    """Plain m = 1 fallback: u = e^{t a p} phi0 + int_0^t e^{(t-tau) a p} f."""
    a = spec.roots[0]
    out = _sat_exp(t * a * pgrid) * phihat0
    if fhat is not None:
        tau, w = gauss_rule(nodes, t)
        for to, wo in zip(tau, w):
            out = out + wo * _sat_exp((t - to) * a * pgrid) * fhat(to) / spec.lead
    return out


def solve(problem: CauchyProblem, nodes=64):
    """Evaluate the closed-form solution at every requested time.

    Returns ([(t, Field), ...], StabilityReport).  Growing modes are computed
    and flagged, never suppressed.
    """
    spec = problem.spec
    pgrid = symbol_grid(problem.P, problem.shape, problem.box)
    phihat = [to_spectral(f).data for f in problem.phi]
    grid_mesh = mesh(problem.shape, problem.box)
    size = int(np.prod(problem.shape))

    fhat_at = None
    if problem.forcing is not None:
        def fhat_at(tau):
            samples = np.asarray(problem.forcing(*grid_mesh, tau), dtype=complex)
            return np.fft.fftn(samples) / size

    snapshots = []
    for t in problem.t_points:
        # saturated modes may hit inf/nan; they are reported, not suppressed
        with np.errstate(over="ignore", invalid="ignore"):
            if spec.m == 1:
                uhat = _duhamel_first_order(spec, pgrid, phihat[0], fhat_at, t, nodes)
            else:
                uhat = homogeneous_mode(spec, pgrid, phihat, t, nodes=nodes)
                if fhat_at is not None:
                    uhat = uhat + inhomogeneous_mode(spec, pgrid, fhat_at, t, nodes=nodes)
        u = from_spectral(SpectralField(problem.shape, problem.box, uhat))
        snapshots.append((t, u))

    t_max = max(problem.t_points) if problem.t_points else 0.0
    report = stability_report(spec, pgrid, problem.shape, t_max)
    return snapshots, report
