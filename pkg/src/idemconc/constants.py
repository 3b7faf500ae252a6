"""Explicit concentration constants and lower bounds.

``gamma2``        max_{x>0} sin x / sqrt(pi x), the sharp L^2 constant.
``delta_p``       (2/pi) int_0^inf |sin u / u|^p du.
``c_p_lower``     sup over 0 < w < 1/2 of the bound with (3/8)^p in place of rho.
``giratio_bound`` the same expression with the exact rho(w, p).
``c_p_star``      (delta_p)^(1/p) / pi * max_{0<=w<=1} sin(pi w) / w^(1-1/p).

The floor in ``c_p``/``giratio_bound`` makes those objectives piecewise
smooth; they are maximized branch by branch on ``(1/(j+1), 1/j]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
OMEGA_XTOL = 1e-12
MAX_BRANCH = 10_000
DELTA_PERIODS = 200
DELTA_TOL = 1e-10


@dataclass(frozen=True)
class BoundReport:
    value: float
    argmax_omega: float | None
    p: float
    formula: str
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "argmax_omega": self.argmax_omega,
            "p": self.p,
            "formula": self.formula,
            "notes": list(self.notes),
        }


def _check_p_above_one(p) -> float:
    p = float(p)
    if not (p > 1.0 and math.isfinite(p)):
        raise DomainError(f"this constant needs a finite p > 1, got {p}")
    return p


def golden_max(fun, lo, hi, xtol: float = OMEGA_XTOL, max_iter: int = 200):
    """Vectorized golden-section maximization of ``fun`` on each ``[lo_i, hi_i]``.

    ``fun`` must accept an array of points (one per bracket) and return an
    array of values.  Returns ``(x, f(x))`` arrays.  On a plateau the left
    point wins, so ties drift toward smaller arguments.
    """
    a = np.array(lo, dtype=float, ndmin=1)
    b = np.array(hi, dtype=float, ndmin=1)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if np.all(b - a <= xtol * np.maximum(1.0, np.abs(a))):
            break
        left = fc >= fd
        # keep [a, d] where the left probe is at least as good
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - GOLDEN * (b - a)
        new_d = a + GOLDEN * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_next = np.where(left, fun(new_c), fd)
        fd_next = np.where(left, fc, fun(new_d))
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
    x = np.where(fc >= fd, c, d)
    # the bracket ends are candidates too (the sup may sit on an edge)
    cand = np.stack([np.array(lo, dtype=float, ndmin=1), x, np.array(hi, dtype=float, ndmin=1)])
    vals = np.stack([fun(row) for row in cand])
    pick = np.argmax(vals, axis=0)
    cols = np.arange(cand.shape[1])
    return cand[pick, cols], vals[pick, cols]


def _reduce_branches(x: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """Branch-wise max with ties broken toward the smaller argument."""
    best = np.max(v)
    hits = np.flatnonzero(v == best)
    i = hits[np.argmin(x[hits])]
    return float(x[i]), float(v[i])


def gamma2() -> float:
    """``max_{x>0} sin x / sqrt(pi x)`` (about 0.4802)."""
    _, v = golden_max(lambda x: np.sin(x) / np.sqrt(np.pi * x), [0.5], [2.0], xtol=1e-14)
    return float(v[0])


def gamma2_argmax() -> float:
    x, _ = golden_max(lambda x: np.sin(x) / np.sqrt(np.pi * x), [0.5], [2.0], xtol=1e-14)
    return float(x[0])


def _sine_moment(p: float) -> float:
    """``(1/pi) int_0^pi sin^p u du``, the period mean of ``|sin u|^p``."""
    return math.exp(special.gammaln((p + 1) / 2) - special.gammaln(p / 2 + 1)) / math.sqrt(math.pi)


def _tail_terms(p: float, big_t: float) -> tuple[float, float]:
    """Tail of ``int_T^inf |sin u|^p u^-p du`` and a bound on what it leaves out.

    Writing ``|sin u|^p = m_p + g(u)`` with ``g`` of zero mean, two integrations
    by parts give ``m_p T^(1-p)/(p-1) + p mu_H T^(-p-1)``; a third bounds the
    remainder by ``p (p+1) max|K| T^(-p-2)`` where ``K`` is the periodic
    second antiderivative of ``g`` (shifted to zero mean).
    """
    m_p = _sine_moment(p)
    s = np.linspace(0.0, math.pi, 8193)
    g = np.sin(s) ** p - m_p
    big_g = integrate.cumulative_trapezoid(g, s, initial=0.0)
    big_h = integrate.cumulative_trapezoid(big_g, s, initial=0.0)
    mu_h = integrate.quad(
        lambda u: (math.sin(u) ** p - m_p) * (math.pi - u) ** 2, 0.0, math.pi, epsabs=0, epsrel=1e-13, limit=200
    )[0] / (2 * math.pi)
    big_k = integrate.cumulative_trapezoid(big_h - mu_h, s, initial=0.0)
    tail = m_p * big_t ** (1 - p) / (p - 1) + p * mu_h * big_t ** (-p - 1)
    bound = p * (p + 1) * float(np.max(np.abs(big_k))) * big_t ** (-p - 2)
    return tail, bound


def _sinc_shape(s: float) -> float:
    # sin s / (s (pi - s)), smooth and positive on [0, pi]
    if s < 1e-8:
        return 1.0 / math.pi
    if math.pi - s < 1e-8:
        return 1.0 / math.pi
    return math.sin(s) / (s * (math.pi - s))


def delta_p(p: float, tol: float = DELTA_TOL) -> float:
    """``(2/pi) int_0^inf |sin u / u|^p du`` to relative accuracy ``tol``.

    Each period ``[k pi, (k+1) pi]`` up to ``T = 200 pi`` goes to QUADPACK's
    algebraic-weight rule (the zeros of ``sin`` are endpoint singularities of
    order ``p``); the rest is the analytic tail of :func:`_tail_terms`.
    """
    p = _check_p_above_one(p)
    tol = float(tol)
    if not (0.0 < tol <= 1e-3):
        raise DomainError(f"tol must lie in (0, 1e-3], got {tol}")
    quad_rel = max(min(tol / 10.0, 1e-8), 1e-13)
    # far periods are tiny and QUADPACK reports their roundoff floor; the
    # requested accuracy is relative to the whole sum, so that is harmless
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        pieces = [
            integrate.quad(
                lambda s: _sinc_shape(s) ** p,
                0.0, math.pi, weight="alg", wvar=(0.0, p), epsabs=0, epsrel=quad_rel, limit=200,
            )[0]
        ]
        for k in range(1, DELTA_PERIODS):
            shift = k * math.pi
            val = integrate.quad(
                lambda s: (_sinc_shape(s) / (s + shift)) ** p,
                0.0, math.pi, weight="alg", wvar=(p, p), epsabs=0, epsrel=quad_rel, limit=200,
            )[0]
            pieces.append(val)
    big_t = DELTA_PERIODS * math.pi
    tail, bound = _tail_terms(p, big_t)
    total = math.fsum(pieces) + tail
    if p < 1.1 and bound > tol * total:
        raise DomainError(
            f"tol {tol:g} is below the tail-correction error bound {bound / total:.2e} at p={p}"
        )
    return 2.0 / math.pi * total


def _cp_expr(omega, p: float, j, rho):
    sinc = np.sin(np.pi * omega) / (np.pi * omega)
    return sinc / (2.0 ** (1 + 1 / p) * (j + 1 + j * rho / (p - 1)) ** (1 / p))


def giratio_bound(omega: float, p: float) -> float:
    """The lower bound at a single ``omega`` with ``rho = ((1/4)(1/w)/floor(1/w))^p``."""
    p = _check_p_above_one(p)
    omega = float(omega)
    if not (0.0 < omega < 0.5):
        raise DomainError(f"omega must lie in (0, 1/2), got {omega}")
    j = math.floor(1.0 / omega)
    rho = (0.25 * (1.0 / omega) / j) ** p
    return float(_cp_expr(omega, p, j, rho))


def cp_integrand(omega: float, p: float) -> float:
    """The expression under the ``sup`` defining ``c_p`` (rho replaced by (3/8)^p)."""
    p = _check_p_above_one(p)
    omega = float(omega)
    if not (0.0 < omega < 0.5):
        raise DomainError(f"omega must lie in (0, 1/2), got {omega}")
    return float(_cp_expr(omega, p, math.floor(1.0 / omega), 0.375**p))


def _branch_sup(p: float, use_rho: bool) -> tuple[float, float]:
    j = np.arange(2, MAX_BRANCH + 1, dtype=float)
    lo, hi = 1.0 / (j + 1.0), 1.0 / j
    # the j = 2 branch is open at 1/2
    hi[0] = np.nextafter(0.5, 0.0)

    def fun(w):
        # floor(1/w) is pinned to the branch index, which at the left
        # endpoint gives the one-sided limit from inside the branch
        rho = (0.25 / (w * j)) ** p if use_rho else 0.375**p
        return _cp_expr(w, p, j, rho)

    x, v = golden_max(fun, lo, hi)
    return _reduce_branches(x, v)


def c_p_lower(p: float) -> BoundReport:
    """``c_p``: supremum over ``0 < w < 1/2``, with its (limiting) maximizer."""
    p = _check_p_above_one(p)
    w, v = _branch_sup(p, use_rho=False)
    notes = ()
    if any(w == 1.0 / j for j in range(3, MAX_BRANCH + 2)):
        notes = ("supremum approached from the right of a floor discontinuity",)
    return BoundReport(value=v, argmax_omega=w, p=p, formula="c_p", notes=notes)


def giratio_sup(p: float) -> BoundReport:
    """Supremum of :func:`giratio_bound` over ``0 < w < 1/2``."""
    p = _check_p_above_one(p)
    w, v = _branch_sup(p, use_rho=True)
    return BoundReport(value=v, argmax_omega=w, p=p, formula="giratio1")


def c_p_star(p: float, tol: float = DELTA_TOL) -> BoundReport:
    """``c_p*``; defined for every ``p > 1`` but only used by the theorem for ``p >= 2``."""
    p = _check_p_above_one(p)
    e = 1.0 - 1.0 / p

    def shape(w):
        w = np.asarray(w, dtype=float)
        return np.sin(np.pi * w) / w**e

    grid = np.linspace(0.0, 1.0, 1001)[1:]
    vals = shape(grid)
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)] if i > 0 else 1e-12
    hi = grid[min(i + 1, grid.size - 1)]
    x, v = golden_max(shape, [lo], [hi])
    factor = delta_p(p, tol) ** (1.0 / p) / math.pi
    notes = () if p >= 2 else ("p < 2: formula evaluated outside the range where it is used",)
    return BoundReport(value=factor * float(v[0]), argmax_omega=float(x[0]), p=p, formula="c_p_star", notes=notes)


def theorem1_lower(p: float) -> BoundReport:
    """``c_p`` for ``1 < p < 2``, ``c_p*`` for ``p > 2``, the larger of the two at ``p = 2``."""
    p = _check_p_above_one(p)
    if p < 2.0:
        return c_p_lower(p)
    if p > 2.0:
        return c_p_star(p)
    a, b = c_p_lower(p), c_p_star(p)
    return b if b.value >= a.value else a
