"""Idempotent trigonometric polynomials and pointwise evaluation.

An idempotent is ``f(x) = sum_{n in S} e(n x)`` with ``e(x) = exp(2 pi i x)``
and ``S`` a finite set of distinct nonnegative integers.  Two representations
are provided:

* :class:`FrequencySet` stores ``S`` explicitly.
* :class:`ProductSet` stores ``f`` as a product of dilated factors
  ``prod_i g_i(l_i x)``, which keeps constructions with ``10^8`` frequencies
  cheap to evaluate.

Both expose ``len``, ``min_freq``/``max_freq``, ``values(x)`` and
``modulus(x)`` so that the quadrature code does not care which one it gets.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, DuplicateFrequency

MAX_FREQ = 2**63 - 1
# Largest set ProductSet.freqs is willing to materialize.
MATERIALIZE_LIMIT = 50_000_000
# Elements per block of the direct-summation kernel (nodes * freqs).
_BLOCK = 1 << 22
# Blocks longer than this are evaluated in closed form by ``values``.
_CLOSED_FORM_MIN = 32


def reduce_unit(x):
    """Reduce ``x`` modulo 1 into ``[0, 1)`` by round-to-nearest subtraction."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 2.0**53):
        raise DomainError("|x| must be below 2**53")
    u = x - np.rint(x)
    return np.where(u < 0, u + 1.0, u)


def _centered(x):
    # mod-1 reduction into [-1/2, 1/2]
    x = np.asarray(x, dtype=float)
    return x - np.rint(x)


def _dilate(x, step: int):
    """Return ``step * x`` reduced to [-1/2, 1/2] without losing the fraction."""
    if step == 1:
        return _centered(x)
    # reduce first so that step * x stays well inside double precision
    return _centered(step * _centered(x))


def dirichlet(n: int, x):
    """Complex Dirichlet kernel ``D_n(x) = sum_{v<n} e(v x)`` in closed form."""
    u = _centered(x)
    s = np.sin(np.pi * u)
    small = np.abs(s) < 1e-300
    safe = np.where(small, 1.0, s)
    mag = np.where(small, float(n), np.sin(n * np.pi * u) / safe)
    return mag * np.exp(1j * np.pi * (n - 1) * u)


def dirichlet_magnitude(n: int, x):
    """``|sin(n pi x) / sin(pi x)|`` with the removable singularity set to ``n``."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    u = _centered(x)
    s = np.sin(np.pi * u)
    small = np.abs(s) < 1e-300
    safe = np.where(small, 1.0, s)
    out = np.where(small, float(n), np.abs(np.sin(n * np.pi * u) / safe))
    return float(out) if out.ndim == 0 else out


def _direct_sum(freqs: np.ndarray, x) -> np.ndarray:
    """Sum ``e(n x)`` over ``freqs`` at every point of ``x``; blocked for memory."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    flat = _centered(x.ravel())
    out = np.empty(flat.size, dtype=complex)
    nf = max(len(freqs), 1)
    step = max(1, _BLOCK // nf)
    fr = freqs.astype(float)
    for i in range(0, flat.size, step):
        xs = flat[i : i + step]
        # n * x mod 1 keeps the phase accurate for large frequencies
        ph = np.outer(xs, fr)
        ph -= np.rint(ph)
        out[i : i + step] = np.exp(2j * np.pi * ph).sum(axis=1)
    return out.reshape(shape)


class FrequencySet:
    """A finite, strictly increasing set of nonnegative integer frequencies."""

    __slots__ = ("_freqs", "_tuple")

    def __init__(self, freqs: Iterable[int]):
        if isinstance(freqs, FrequencySet):
            arr = freqs._freqs
        else:
            items = [int(v) for v in freqs]
            if any(v < 0 for v in items):
                raise DomainError("frequencies must be nonnegative")
            if any(v > MAX_FREQ for v in items):
                raise DomainError("frequency exceeds 63 bits")
            arr = np.array(items, dtype=np.int64)
            if arr.size > 1 and np.any(np.diff(arr) <= 0):
                raise DomainError("frequencies must be strictly increasing")
            arr.setflags(write=False)
        self._freqs = arr
        self._tuple = None

    @classmethod
    def block(cls, n: int, step: int = 1) -> "FrequencySet":
        """``{0, step, ..., (n-1) step}``, the frequencies of ``D_n(step x)``."""
        if n < 1 or step < 1:
            raise DomainError("block length and step must be positive")
        return cls(range(0, n * step, step))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FrequencySet":
        arr = np.asarray(arr, dtype=np.int64)
        if arr.size and (arr[0] < 0 or np.any(np.diff(arr) <= 0)):
            raise DomainError("frequencies must be nonnegative and strictly increasing")
        obj = cls.__new__(cls)
        arr = arr.copy()
        arr.setflags(write=False)
        obj._freqs = arr
        obj._tuple = None
        return obj

    @property
    def freqs(self) -> np.ndarray:
        return self._freqs

    def as_tuple(self) -> tuple[int, ...]:
        if self._tuple is None:
            self._tuple = tuple(int(v) for v in self._freqs)
        return self._tuple

    def __len__(self) -> int:
        return int(self._freqs.size)

    def __iter__(self):
        return iter(self.as_tuple())

    def __contains__(self, n) -> bool:
        i = np.searchsorted(self._freqs, n)
        return bool(i < self._freqs.size and self._freqs[i] == n)

    def __eq__(self, other) -> bool:
        if isinstance(other, ProductSet):
            other = other.materialize()
        if not isinstance(other, FrequencySet):
            return NotImplemented
        return self.as_tuple() == other.as_tuple()

    def __lt__(self, other: "FrequencySet") -> bool:
        return self.as_tuple() < other.as_tuple()

    def __hash__(self) -> int:
        return hash(self.as_tuple())

    def __repr__(self) -> str:
        if len(self) <= 12:
            return f"FrequencySet({list(self.as_tuple())})"
        head = ", ".join(str(v) for v in self.as_tuple()[:6])
        return f"FrequencySet([{head}, ...] n={len(self)} max={self.max_freq})"

    @property
    def min_freq(self) -> int:
        self._require_nonempty()
        return int(self._freqs[0])

    @property
    def max_freq(self) -> int:
        self._require_nonempty()
        return int(self._freqs[-1])

    @property
    def is_block(self) -> bool:
        """True for ``{0, 1, ..., n-1}``."""
        return len(self) > 0 and self._freqs[0] == 0 and self._freqs[-1] == len(self) - 1

    def _require_nonempty(self):
        if len(self) == 0:
            raise DomainError("operation requires a nonempty frequency set")

    def materialize(self) -> "FrequencySet":
        return self

    def shifted(self, delta: int) -> "FrequencySet":
        return FrequencySet.from_array(self._freqs + delta)

    def values(self, x) -> np.ndarray:
        """``f(x)`` at every point of ``x`` (batched; closed form for long blocks)."""
        self._require_nonempty()
        if self.is_block and len(self) >= _CLOSED_FORM_MIN:
            return dirichlet(len(self), x)
        return _direct_sum(self._freqs, x)

    def modulus(self, x) -> np.ndarray:
        self._require_nonempty()
        if self.is_block and len(self) >= _CLOSED_FORM_MIN:
            return np.abs(dirichlet_magnitude(len(self), np.asarray(x, dtype=float)))
        return np.abs(_direct_sum(self._freqs, x))

    def to_text(self) -> str:
        return "".join(f"{v}\n" for v in self.as_tuple())


class ProductSet:
    """Idempotent ``prod_i g_i(l_i x)`` held in factored form.

    ``factors`` is a sequence of ``(FrequencySet, dilation)`` pairs.  The
    frequencies are the sums ``sum_i l_i n_i``; these must be pairwise
    distinct, which is checked structurally (mixed-radix condition) or, for
    small products, by materializing.
    """

    __slots__ = ("factors", "_materialized")

    def __init__(self, factors: Sequence[tuple[FrequencySet, int]]):
        facs = []
        for base, step in factors:
            base = base.materialize() if isinstance(base, ProductSet) else base
            if not isinstance(base, FrequencySet) or len(base) == 0:
                raise DomainError("factors must be nonempty frequency sets")
            if int(step) < 1:
                raise DomainError("dilations must be positive")
            facs.append((base, int(step)))
        if not facs:
            raise DomainError("a product needs at least one factor")
        self.factors = tuple(sorted(facs, key=lambda f: f[1]))
        self._materialized = None
        if sum(step * base.max_freq for base, step in self.factors) > MAX_FREQ:
            raise DomainError("frequency exceeds 63 bits")
        if not self._mixed_radix():
            if len(self) > MATERIALIZE_LIMIT:
                raise DomainError("cannot verify distinctness of a product this large")
            self.materialize()

    def _mixed_radix(self) -> bool:
        reach = 0
        for base, step in self.factors:
            span = base.max_freq - base.min_freq
            if len(base) > 1 and reach >= step:
                return False
            reach += step * span
        return True

    def __len__(self) -> int:
        return math.prod(len(base) for base, _ in self.factors)

    @property
    def min_freq(self) -> int:
        return sum(step * base.min_freq for base, step in self.factors)

    @property
    def max_freq(self) -> int:
        return sum(step * base.max_freq for base, step in self.factors)

    def materialize(self) -> FrequencySet:
        if self._materialized is None:
            if len(self) > MATERIALIZE_LIMIT:
                raise DomainError(f"product has {len(self)} frequencies; too many to list")
            acc = np.zeros(1, dtype=np.int64)
            for base, step in self.factors:
                acc = (acc[:, None] + step * base.freqs[None, :]).ravel()
            acc.sort()
            if acc.size > 1 and np.any(np.diff(acc) == 0):
                raise DuplicateFrequency("product has a repeated frequency")
            self._materialized = FrequencySet.from_array(acc)
        return self._materialized

    @property
    def freqs(self) -> np.ndarray:
        return self.materialize().freqs

    def __iter__(self):
        return iter(self.materialize())

    def __eq__(self, other) -> bool:
        if isinstance(other, (FrequencySet, ProductSet)):
            return self.materialize() == (
                other.materialize() if isinstance(other, ProductSet) else other
            )
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.materialize())

    def __repr__(self) -> str:
        parts = " * ".join(
            f"D_{len(b)}({s}x)" if b.is_block else f"g[{len(b)}]({s}x)" for b, s in self.factors
        )
        return f"ProductSet({parts})"

    def shifted(self, delta: int) -> "ProductSet":
        base, step = self.factors[0]
        if delta % step:
            return ProductSet([(self.materialize().shifted(delta), 1)])
        facs = list(self.factors)
        facs[0] = (base.shifted(delta // step), step)
        return ProductSet(facs)

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape, dtype=complex)
        for base, step in self.factors:
            out *= base.values(_dilate(x, step))
        return out

    def modulus(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape, dtype=float)
        for base, step in self.factors:
            out *= base.modulus(_dilate(x, step))
        return out

    def to_text(self) -> str:
        return self.materialize().to_text()


def as_frequency_set(s) -> FrequencySet:
    """Coerce a ``FrequencySet``, ``ProductSet`` or iterable of ints."""
    if isinstance(s, FrequencySet):
        return s
    if isinstance(s, ProductSet):
        return s.materialize()
    return FrequencySet(s)


def eval_sum(s, x) -> complex:
    """``sum_{n in s} exp(2 pi i n x)`` by direct summation."""
    s = as_frequency_set(s)
    if len(s) == 0:
        raise DomainError("eval_sum needs a nonempty set")
    return complex(_direct_sum(s.freqs, np.asarray([x], dtype=float))[0])


def sumset_product(a, b) -> FrequencySet:
    """Frequencies of the product of two idempotents; fails on any collision."""
    a, b = as_frequency_set(a), as_frequency_set(b)
    if len(a) == 0 or len(b) == 0:
        raise DomainError("sumset_product needs nonempty sets")
    sums = (a.freqs[:, None] + b.freqs[None, :]).ravel()
    sums.sort()
    if sums.size > 1 and np.any(np.diff(sums) == 0):
        raise DuplicateFrequency("u + v = u' + v' for two different pairs")
    return FrequencySet.from_array(sums)


def canonicalize(s):
    """Translate ``s`` so its smallest frequency is 0 (``|f|`` is unchanged)."""
    if isinstance(s, ProductSet):
        return ProductSet([(b.shifted(-b.min_freq), st) for b, st in s.factors])
    s = as_frequency_set(s)
    lo = s.min_freq
    return s if lo == 0 else s.shifted(-lo)


def reflect(s):
    """``{max(s) - n : n in s}``; its modulus is ``|f(-x)|``."""
    if isinstance(s, ProductSet):
        return ProductSet([(reflect(b), st) for b, st in s.factors])
    s = as_frequency_set(s)
    return FrequencySet.from_array((s.max_freq - s.freqs)[::-1])


def parse_frequency_text(text: str) -> FrequencySet:
    """Parse the line format: one integer per line, ``#`` starts a comment."""
    vals = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals.append(int(line))
        except ValueError:
            raise DomainError(f"line {lineno}: not an integer: {line!r}") from None
    return FrequencySet(vals)


def parse_frequency_list(text: str) -> FrequencySet:
    """Parse the inline comma-separated form, e.g. ``"0,1,3"``."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        return FrequencySet(int(p) for p in parts)
    except ValueError:
        raise DomainError(f"bad frequency list: {text!r}") from None
