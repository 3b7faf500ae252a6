"""L^p integrals of idempotents over the circle and over interval unions.

The integrand ``|f|^p`` is evaluated as ``(re^2 + im^2)^(p/2)``.  Integration
is composite 16-point Gauss-Legendre on panels no wider than
``1/(8 * span)``; each panel is compared against its two halves and the
adaptive loop either doubles the uniform grid or bisects the offending
panels until the summed error estimate falls under ``tol`` relative.
On the full period explicit sets are sampled with FFTs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np
import scipy.fft

from .errors import DomainError, NumericalFailure
from .kernel import FrequencySet, ProductSet, as_frequency_set, canonicalize

DEFAULT_TOL = 1e-9
GL_ORDER = 16
PANELS_PER_FREQ = 8
MAX_NODES = 1 << 26
MAX_DEPTH = 60
# |s|^(p/2) limit for reading the constant term of |f|^p exactly
EXPANSION_LIMIT = 4096

_gl_x, _gl_w = np.polynomial.legendre.leggauss(GL_ORDER)
GL_TAU = (_gl_x + 1.0) / 2.0
GL_WEIGHTS = _gl_w / 2.0


@dataclass(frozen=True)
class IntervalUnion:
    """Disjoint half-open intervals ``[a, b)`` inside ``[0, 1)``, sorted."""

    intervals: tuple[tuple[float, float], ...]
    exact: tuple[tuple[Fraction, Fraction], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        if not ivs:
            raise DomainError("an interval union needs at least one interval")
        for a, b in ivs:
            if not (0.0 <= a < b <= 1.0):
                raise DomainError(f"interval [{a}, {b}) is not inside [0, 1)")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise DomainError("intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def from_fractions(cls, pieces: Iterable[tuple[Fraction, Fraction]]) -> "IntervalUnion":
        pieces = sorted((Fraction(a), Fraction(b)) for a, b in pieces)
        return cls(tuple((float(a), float(b)) for a, b in pieces), exact=tuple(pieces))

    @classmethod
    def full(cls) -> "IntervalUnion":
        return cls.from_fractions([(Fraction(0), Fraction(1))])

    @classmethod
    def arc(cls, center, half_width) -> "IntervalUnion":
        """``[center - h, center + h]`` on the torus, split at 0 if it wraps."""
        c, h = Fraction(center), Fraction(half_width)
        if not (0 < h <= Fraction(1, 2)):
            raise DomainError("half-width must lie in (0, 1/2]")
        if h == Fraction(1, 2):
            return cls.full()
        lo = c - h
        hi = c + h
        lo -= math.floor(lo)
        hi = lo + 2 * h
        if hi <= 1:
            return cls.from_fractions([(lo, hi)])
        return cls.from_fractions([(Fraction(0), hi - 1), (lo, Fraction(1))])

    @classmethod
    def parse(cls, text: str) -> "IntervalUnion":
        """Parse ``"a:b[,a:b...]"`` or ``"c=1/6;h=1/222"`` (exact rationals)."""
        text = text.strip()
        try:
            if text.startswith("c="):
                fields = dict(part.split("=", 1) for part in text.split(";") if part.strip())
                return cls.arc(Fraction(fields["c"].strip()), Fraction(fields["h"].strip()))
            pieces = []
            for part in text.split(","):
                a, b = part.split(":")
                pieces.append((Fraction(a.strip()), Fraction(b.strip())))
        except (ValueError, KeyError, ZeroDivisionError):
            raise DomainError(f"cannot parse interval set {text!r}") from None
        return cls.from_fractions(pieces)

    @property
    def measure(self) -> float:
        if self.exact is not None:
            return float(sum(b - a for a, b in self.exact))
        return math.fsum(b - a for a, b in self.intervals)

    @property
    def is_full_period(self) -> bool:
        if self.exact is not None:
            return sum(b - a for a, b in self.exact) == 1
        return self.intervals == ((0.0, 1.0),)

    def contains(self, other: "IntervalUnion") -> bool:
        return all(any(a <= c and d <= b for a, b in self.intervals) for c, d in other.intervals)

    def __str__(self) -> str:
        return ",".join(f"{a!r}:{b!r}" for a, b in self.intervals)


@dataclass(frozen=True)
class ConcentrationResult:
    numerator: float
    denominator: float
    ratio: float
    p: float
    path: str

    def to_dict(self) -> dict:
        return {
            "numerator": self.numerator,
            "denominator": self.denominator,
            "ratio": self.ratio,
            "p": self.p,
            "path": self.path,
        }


def check_exponent(p: float) -> float:
    p = float(p)
    if not (p >= 1.0 and math.isfinite(p)):
        raise DomainError(f"exponent p must be a finite real >= 1, got {p}")
    return p


def _check_tol(tol: float) -> float:
    tol = float(tol)
    if not (0.0 < tol <= 1e-3):
        raise DomainError(f"tol must lie in (0, 1e-3], got {tol}")
    return tol


def _power(values: np.ndarray, p: float) -> np.ndarray:
    sq = values.real**2 + values.imag**2
    if p == 2.0:
        return sq
    return sq ** (p / 2.0)


class _Integrand:
    """``|f|^p`` for one canonicalized idempotent."""

    def __init__(self, s, p: float):
        self.s = canonicalize(s)
        self.p = p
        self.span = self.s.max_freq
        self.explicit = isinstance(self.s, FrequencySet)

    def at(self, x: np.ndarray) -> np.ndarray:
        if self.explicit:
            return _power(self.s.values(x), self.p)
        return self.s.modulus(x) ** self.p

    def panels(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """GL integral of each panel ``[lo_i, hi_i]``."""
        h = hi - lo
        nodes = lo[:, None] + h[:, None] * GL_TAU[None, :]
        vals = self.at(nodes.ravel()).reshape(nodes.shape)
        return (vals @ GL_WEIGHTS) * h

    def period_grid(self, cells: int) -> np.ndarray:
        """GL integrals of the ``cells`` uniform cells of ``[0, 1)``."""
        if not self.explicit or len(self.s) <= 16 or cells <= self.span:
            edges = np.arange(cells + 1, dtype=float) / cells
            return self.panels(edges[:-1], edges[1:])
        acc = np.zeros(cells)
        freqs = self.s.freqs
        for tau, w in zip(GL_TAU, GL_WEIGHTS):
            coeff = np.zeros(cells, dtype=complex)
            ph = freqs * (tau / cells)
            coeff[freqs] = np.exp(2j * np.pi * (ph - np.rint(ph)))
            vals = scipy.fft.ifft(coeff) * cells
            acc += w * _power(vals, self.p)
        return acc / cells


def _initial_cells(length: float, span: int) -> int:
    return max(1, math.ceil(length * PANELS_PER_FREQ * max(span, 1)))


def _refine(f: _Integrand, lo, hi, est, budget) -> np.ndarray:
    """Bisect panels until each half-sum agrees with its parent estimate."""
    owner = np.arange(lo.size)
    out = np.zeros(lo.size)
    share = np.full(lo.size, budget / max(lo.size, 1))
    for _ in range(MAX_DEPTH):
        if lo.size == 0:
            return out
        mid = 0.5 * (lo + hi)
        left = f.panels(lo, mid)
        right = f.panels(mid, hi)
        both = left + right
        done = np.abs(both - est) <= share
        np.add.at(out, owner[done], both[done])
        keep = ~done
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        owner, share = owner[keep], share[keep] / 2.0
        est = np.concatenate([left[keep], right[keep]])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        owner, share = np.concatenate([owner, owner]), np.concatenate([share, share])
    if lo.size:
        raise NumericalFailure("adaptive bisection did not converge")
    return out


def _integrate(f: _Integrand, a: float, b: float, tol: float) -> float:
    full = a == 0.0 and b == 1.0
    cells = _initial_cells(b - a, f.span)
    if full:
        cells = max(cells, 8)

    def uniform(n):
        if n * GL_ORDER > MAX_NODES:
            raise NumericalFailure(
                f"integral needs more than {MAX_NODES} nodes (span {f.span}); "
                "use an exact path or a shorter interval"
            )
        if full:
            return f.period_grid(n)
        edges = a + (b - a) * (np.arange(n + 1, dtype=float) / n)
        edges[-1] = b
        return f.panels(edges[:-1], edges[1:])

    coarse = uniform(cells)
    # |f|^p <= |s|^p bounds the round-off floor of the error budget
    floor = 1e-15 * (b - a) * float(len(f.s)) ** f.p
    while True:
        fine2 = uniform(2 * cells)
        fine = fine2[0::2] + fine2[1::2]
        err = np.abs(fine - coarse)
        total = float(np.sum(fine))
        budget = max(tol * abs(total), floor)
        if err.sum() <= budget:
            return total
        bad = err > budget / cells
        good_err = float(err[~bad].sum())
        nbad = int(bad.sum())
        widen = nbad > max(4, cells // 16) or good_err > budget / 2
        if widen and 4 * cells * GL_ORDER <= MAX_NODES:
            cells *= 2
            coarse = fine2
            continue
        idx = np.flatnonzero(bad)
        edges_lo = a + (b - a) * (idx / cells)
        edges_hi = a + (b - a) * ((idx + 1) / cells)
        refined = _refine(f, edges_lo, edges_hi, coarse[idx], budget - good_err)
        vals = fine.copy()
        vals[idx] = refined
        return float(np.sum(vals))


def _expansion_constant_term(s, p: float) -> float:
    """Constant Fourier coefficient of ``|f|^p`` for even integer ``p``."""
    r = int(round(p)) // 2
    freqs = np.asarray(as_frequency_set(s).freqs, dtype=np.int64) - int(s.min_freq)
    sums = np.zeros(1, dtype=np.int64)
    for _ in range(r):
        sums = (sums[:, None] + freqs[None, :]).ravel()
    _, counts = np.unique(sums, return_counts=True)
    return float(np.sum(counts.astype(np.int64) ** 2))


def _require_nonempty(s):
    if isinstance(s, (FrequencySet, ProductSet)):
        if len(s) == 0:
            raise DomainError("integrals need a nonempty frequency set")
        return s
    s = as_frequency_set(s)
    if len(s) == 0:
        raise DomainError("integrals need a nonempty frequency set")
    return s


def norm_p_period_with_path(s, p: float, tol: float = DEFAULT_TOL, *, exact: bool = True):
    s = _require_nonempty(s)
    p = check_exponent(p)
    tol = _check_tol(tol)
    if exact:
        if p == 2.0:
            return float(len(s)), "exact-parseval"
        if p == round(p) and int(p) % 2 == 0 and len(s) ** (p / 2) <= EXPANSION_LIMIT:
            return _expansion_constant_term(s, p), "trig-expansion"
    return _integrate(_Integrand(s, p), 0.0, 1.0, tol), "quadrature"


def norm_p_period(s, p: float, tol: float = DEFAULT_TOL, *, exact: bool = True) -> float:
    """``int_0^1 |f|^p dx`` to relative accuracy ``tol``.

    With ``exact=False`` the Parseval and trigonometric-expansion shortcuts
    are skipped and the value always comes from quadrature.
    """
    return norm_p_period_with_path(s, p, tol, exact=exact)[0]


def norm_p_set(s, e: IntervalUnion, p: float, tol: float = DEFAULT_TOL, *, exact: bool = True) -> float:
    """``int_E |f|^p dx`` summed over the intervals of ``e``."""
    s = _require_nonempty(s)
    p = check_exponent(p)
    tol = _check_tol(tol)
    if e.is_full_period:
        return norm_p_period(s, p, tol, exact=exact)
    f = _Integrand(s, p)
    return math.fsum(_integrate(f, a, b, tol) for a, b in e.intervals)


def concentration_ratio(s, e: IntervalUnion, p: float, tol: float = DEFAULT_TOL) -> ConcentrationResult:
    """``(int_E |f|^p / int_T |f|^p)^(1/p)`` with both integrals."""
    s = _require_nonempty(s)
    p = check_exponent(p)
    if e.measure <= 0:
        raise DomainError("the target set must have positive measure")
    den, path = norm_p_period_with_path(s, p, tol)
    if den < 1e-300:
        raise NumericalFailure("denominator vanished")
    num = den if e.is_full_period else norm_p_set(s, e, p, tol)
    ratio = min((num / den) ** (1.0 / p), 1.0)
    if not ratio > 0:
        raise NumericalFailure("numerator vanished")
    return ConcentrationResult(numerator=num, denominator=den, ratio=ratio, p=p, path=path)
