"""Concentrated idempotents.

* ``build_simple``       ``D_{mq}(qx) D_w(x)``, concentrated near ``1/q``.
* ``build_concentrated`` ``D_{mQ}(qx) G(x)`` where ``G`` collects the residues
  ``r a mod q`` (``a`` the inverse of ``k``), concentrated near ``k/q``.
* ``build_special``      ``D_k(lx) D_m(x)``.
* ``build_weyl``         ``{1 <= n <= N : ||n xi - theta|| <= w/2}``.

Products are returned as :class:`~idemconc.kernel.ProductSet` so that
constructions with ``10^8`` frequencies stay cheap; call ``materialize()``
for the explicit list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .constants import giratio_bound
from .errors import DomainError, DuplicateFrequency
from .kernel import MAX_FREQ, FrequencySet, ProductSet, eval_sum

XI_PRESETS = {
    "sqrt2-1": math.sqrt(2.0) - 1.0,
    "golden": (math.sqrt(5.0) - 1.0) / 2.0,
}

_TRIAL_LIMIT = 1_000_000
# deterministic for every n < 3.3e24
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    """Trial division by odd numbers up to 10^6, then Miller-Rabin."""
    n = int(n)
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    limit = min(math.isqrt(n), _TRIAL_LIMIT)
    for d in range(3, limit + 1, 2):
        if n % d == 0:
            return False
    if math.isqrt(n) <= _TRIAL_LIMIT:
        return True
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _primes_upto(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for i in range(2, math.isqrt(n) + 1):
        if sieve[i]:
            sieve[i * i :: i] = False
    return [int(v) for v in np.flatnonzero(sieve)]


def bezout_inverse(k: int, q: int) -> tuple[int, int]:
    """The pair ``(a, b)`` with ``a k - b q = 1``, ``0 < a < q`` and ``0 <= b < k``."""
    k, q = int(k), int(q)
    if not is_prime(q):
        raise DomainError(f"q={q} is not prime")
    if not (1 <= k < q):
        raise DomainError(f"k must lie in [1, q), got k={k}")
    if math.gcd(k, q) != 1:
        raise DomainError(f"gcd({k}, {q}) != 1")
    a = pow(k, -1, q)
    b = (a * k - 1) // q
    return a, b


def breakpoints(a: int, q: int) -> tuple[int, ...]:
    """``t_0 = 0``, ``t_j = ceil(j q / a)``, ``t_a = q``."""
    a, q = int(a), int(q)
    if not (0 < a < q):
        raise DomainError("need 0 < a < q")
    return tuple(-(-j * q // a) for j in range(a + 1))


@dataclass(frozen=True)
class ConstructionRecipe:
    """Parameters of the modular-inverse construction."""

    q: int
    k: int
    a: int
    b: int
    ell: int
    m: int
    Q: int

    def __post_init__(self):
        if self.a * self.k - self.b * self.q != 1:
            raise DomainError("a k - b q must equal 1")
        if not (0 < self.a < self.q and 0 <= self.b < self.k):
            raise DomainError("Bezout pair out of range")
        if not (1 <= self.ell and 2 * self.ell < self.a):
            raise DomainError(f"ell must satisfy 1 <= ell < a/2 (a={self.a}, ell={self.ell})")
        if self.m < 1 or self.Q < 1:
            raise DomainError("m and Q must be positive")
        if not is_prime(self.q):
            raise DomainError(f"q={self.q} is not prime")

    @classmethod
    def from_target(cls, q: int, k: int, omega: float, m: int | None = None, Q: int = 1) -> "ConstructionRecipe":
        """Pick ``ell = clamp(round(omega a), 1, ceil(a/2) - 1)``.

        Raises :class:`DomainError` when ``a <= 2`` (no admissible ``ell``);
        :func:`construct_general` falls back to the simple product then.
        """
        a, b = bezout_inverse(k, q)
        if a <= 2:
            raise DomainError(f"a={a} leaves no admissible ell")
        hi = -(-a // 2) - 1
        ell = min(max(round(omega * a), 1), hi)
        return cls(q=q, k=k, a=a, b=b, ell=ell, m=q if m is None else int(m), Q=int(Q))

    @property
    def omega(self) -> float:
        """The effective ``omega = ell / a``."""
        return self.ell / self.a

    @property
    def block_length(self) -> int:
        """``t_ell = ceil(ell q / a)``, the number of residues in ``G``."""
        return -(-self.ell * self.q // self.a)

    def to_dict(self) -> dict:
        return {
            "q": self.q, "k": self.k, "a": self.a, "b": self.b, "ell": self.ell,
            "m": self.m, "Q": self.Q, "omega": self.omega, "block_length": self.block_length,
        }


def build_G(recipe: ConstructionRecipe) -> FrequencySet:
    """``{r a mod q : 0 <= r < t_ell}``."""
    r = np.arange(recipe.block_length, dtype=np.int64)
    vals = np.sort((r * recipe.a) % recipe.q)
    if vals.size > 1 and np.any(np.diff(vals) == 0):
        raise DuplicateFrequency("alpha is not injective on the block")
    return FrequencySet.from_array(vals)


def _check_range(count: int, step: int, top: int):
    if (count - 1) * step + top > MAX_FREQ:
        raise DomainError("construction exceeds 63-bit frequencies")


def build_concentrated(recipe: ConstructionRecipe) -> ProductSet:
    """``{q n + alpha(r) : r < t_ell, n < m Q}`` as the product ``D_{mQ}(qx) G(x)``."""
    g = build_G(recipe)
    count = recipe.m * recipe.Q
    _check_range(count, recipe.q, g.max_freq)
    return ProductSet([(g, 1), (FrequencySet.block(count), recipe.q)])


def build_simple(q: int, m: int, w: int) -> ProductSet:
    """``D_{mq}(qx) D_w(x)``: frequencies ``q n + r`` with ``n < mq``, ``r < w``."""
    q, m, w = int(q), int(m), int(w)
    if q < 1 or m < 1 or w < 1:
        raise DomainError("q, m and w must be positive")
    if w > q:
        raise DuplicateFrequency(f"w={w} > q={q} makes the residues overlap")
    _check_range(m * q, q, w - 1)
    return ProductSet([(FrequencySet.block(w), 1), (FrequencySet.block(m * q), q)])


def simple_block_length(q: int, omega: float) -> int:
    """Nearest block length ``w`` to ``omega q``, clamped to ``[1, q]``."""
    if not (0.0 < omega <= 1.0):
        raise DomainError("omega must lie in (0, 1]")
    return min(max(1, round(omega * q)), int(q))


def build_special(k: int, l: int, m: int) -> ProductSet:
    """``D_k(lx) D_m(x) = {l i + j : i < k, j < m}``; needs ``m <= l``."""
    k, l, m = int(k), int(l), int(m)
    if k < 1 or l < 1 or m < 1:
        raise DomainError("k, l and m must be positive")
    if m > l and k > 1:
        raise DuplicateFrequency(f"m={m} > l={l}: shifted blocks overlap")
    if k == 1:
        return ProductSet([(FrequencySet.block(m), 1)])
    return ProductSet([(FrequencySet.block(m), 1), (FrequencySet.block(k), l)])


@dataclass(frozen=True)
class Construction:
    """Outcome of :func:`construct_general`."""

    freqs: ProductSet
    omega: float
    recipe: ConstructionRecipe | None
    mode: str

    def predicted_bound(self, p: float) -> float | None:
        """The per-omega lower bound at the effective omega (``None`` if out of range)."""
        if not (0.0 < self.omega < 0.5) or p <= 1:
            return None
        return giratio_bound(self.omega, p)


def construct_general(q: int, k: int, omega: float, m: int | None = None, Q: int = 1) -> Construction:
    """Modular-inverse construction, or the simple product when ``a <= 2``.

    The fallback keeps the ``D_{mQ}(qx)`` outer factor and uses a block of
    ``ceil(omega q)`` residues, which is what the general recipe gives for
    ``k = 1``.
    """
    if not (0.0 < omega < 0.5):
        raise DomainError(f"omega must lie in (0, 1/2), got {omega}")
    a, _ = bezout_inverse(k, q)
    m = q if m is None else int(m)
    if a <= 2:
        w = max(1, math.ceil(omega * q))
        _check_range(m * Q, q, w - 1)
        prod = ProductSet([(FrequencySet.block(w), 1), (FrequencySet.block(m * Q), q)])
        return Construction(freqs=prod, omega=w / q, recipe=None, mode="simple-fallback")
    recipe = ConstructionRecipe.from_target(q, k, omega, m, Q)
    return Construction(freqs=build_concentrated(recipe), omega=recipe.omega, recipe=recipe, mode="general")


def rational_approx(xi: float, q_max: int) -> list[tuple[int, int]]:
    """Pairs ``(k, q)``, ``q <= q_max`` prime, with ``|xi - k/q| < 1/q^2``.

    ``k = round(xi q)`` is the only candidate for each ``q``; the inequality is
    checked in exact rational arithmetic on the binary value of ``xi``.
    """
    xi = float(xi)
    if not (0.0 < xi < 1.0):
        raise DomainError("xi must lie in (0, 1)")
    if int(q_max) < 2:
        raise DomainError("q_max must be at least 2")
    exact = Fraction(xi)
    out = []
    for q in _primes_upto(int(q_max)):
        k = round(exact * q)
        if abs(exact * q - k) * q < 1:
            out.append((int(k), q))
    return out


@dataclass(frozen=True)
class WeylRecipe:
    xi: float
    omega: float
    n_max: int
    theta: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.xi < 1.0):
            raise DomainError("xi must lie in (0, 1)")
        if not (0.0 < self.omega <= 1.0):
            raise DomainError("omega must lie in (0, 1]")
        if self.n_max < 1:
            raise DomainError("N must be positive")
        if not (0.0 <= self.theta < 1.0):
            raise DomainError("theta must lie in [0, 1)")


def _dist_to_int(t: np.ndarray) -> np.ndarray:
    return np.abs(t - np.rint(t))


def build_weyl(recipe: WeylRecipe) -> FrequencySet:
    """``S_theta``; may be empty."""
    n = np.arange(1, recipe.n_max + 1, dtype=np.int64)
    # n xi mod 1 first, so the subtraction of theta does not lose digits
    frac = n * recipe.xi
    frac -= np.floor(frac)
    keep = _dist_to_int(frac - recipe.theta) <= recipe.omega / 2
    return FrequencySet.from_array(n[keep])


def theta_breakpoints(xi: float, omega: float, n_max: int) -> np.ndarray:
    """Sorted points of ``[0, 1)`` where ``S_theta`` can change."""
    WeylRecipe(xi, omega, n_max)
    n = np.arange(1, int(n_max) + 1, dtype=float)
    frac = n * xi
    frac -= np.floor(frac)
    pts = np.concatenate([frac - omega / 2, frac + omega / 2])
    pts -= np.floor(pts)
    pts = np.sort(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-15])
    return pts[keep]


def weyl_theta_l2(xi: float, omega: float, n_max: int, x: float) -> float:
    """``int_0^1 |f_theta(x)|^2 d theta``, exact up to rounding.

    ``S_theta`` is constant between consecutive breakpoints, so the integral
    is a finite sum of gap lengths times ``|f_theta(x)|^2`` at gap midpoints.
    """
    pts = theta_breakpoints(xi, omega, n_max)
    ends = np.append(pts[1:], pts[0] + 1.0)
    total = []
    for lo, hi in zip(pts, ends):
        mid = 0.5 * (lo + hi)
        mid -= math.floor(mid)
        s = build_weyl(WeylRecipe(xi, omega, n_max, mid))
        val = abs(eval_sum(s, x)) ** 2 if len(s) else 0.0
        total.append((hi - lo) * val)
    return math.fsum(total)
