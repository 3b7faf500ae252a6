"""Exhaustive search for the idempotent most concentrated near ``1/q``.

Every subset of ``{0, ..., n-1}`` is scored on the arc
``J = [1/q - 1/(mq), 1/q + 1/(mq)]``.  Because ``|f|`` is unchanged by
translation, enumeration fixes ``0`` in the set (``canonical_only``).

Scoring runs in two stages:

1. A fixed Gauss-Legendre grid (full period and ``J``) is evaluated for
   every candidate.  Candidates are visited in Gray-code order so that the
   complex sums at the nodes change by one row of ``exp(2 pi i f x)`` per
   step; blocks of steps are applied with a cumulative sum.
2. The best ``top_k`` distinct sets of stage 1 and every special set
   ``D_k(lx) D_m(x)`` are re-scored with the adaptive quadrature of
   :mod:`idemconc.quadrature`.  Reported ratios come from this stage.

Coefficients are real, so ``|f(-x)| = |f(x)|`` and a set ties exactly with
its reflection ``{max - s}``.  Stage 1 keys each candidate by the smaller of
the two (after translating to 0), which also makes tie-breaking towards the
lexicographically smallest set well defined.

The index space is cut into chunks of ``2**12`` independent of the number of
workers, so reports do not depend on how many processes ran.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import DomainError
from .kernel import FrequencySet, canonicalize, reflect
from .quadrature import GL_TAU, GL_WEIGHTS, IntervalUnion, concentration_ratio

N_GUARD = 30
CHUNK = 1 << 12
REFRESH = 1 << 16
BLOCK = 64
CHECKPOINT_EVERY = 1 << 20
TOP_K = 32
PANELS_PER_FREQ = 16
ENGINE_VERSION = 1


@dataclass(frozen=True)
class SearchConfig:
    q: int
    n: int
    m: int | None = None
    p: float = 1.0
    tol: float = 1e-7
    canonical_only: bool = True
    chunk: tuple[int, int] | None = None
    top_k: int = TOP_K

    def __post_init__(self):
        if int(self.q) < 2:
            raise DomainError("q must be at least 2")
        if not (1 <= int(self.n) <= N_GUARD):
            raise DomainError(f"n must lie in [1, {N_GUARD}]; larger searches are not supported")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "n", int(self.n))
        m = self.q * self.q + 1 if self.m is None else int(self.m)
        if m < 1:
            raise DomainError("m must be positive")
        object.__setattr__(self, "m", m)
        p = float(self.p)
        if not (p >= 1.0 and math.isfinite(p)):
            raise DomainError("p must be a finite real >= 1")
        object.__setattr__(self, "p", p)
        if not (0.0 < float(self.tol) <= 1e-3):
            raise DomainError("tol must lie in (0, 1e-3]")
        object.__setattr__(self, "tol", float(self.tol))
        if self.top_k < 1:
            raise DomainError("top_k must be positive")
        space = self.space
        if self.chunk is None:
            object.__setattr__(self, "chunk", (0, space))
        else:
            lo, hi = (int(v) for v in self.chunk)
            if not (0 <= lo < hi <= space):
                raise DomainError(f"chunk must lie within [0, {space})")
            object.__setattr__(self, "chunk", (lo, hi))

    @property
    def space(self) -> int:
        """Number of subsets indexed: ``2^(n-1)`` with 0 fixed, else ``2^n``."""
        return 1 << (self.n - 1) if self.canonical_only else 1 << self.n

    @property
    def target(self) -> IntervalUnion:
        return IntervalUnion.arc(Fraction(1, self.q), Fraction(1, self.m * self.q))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["chunk"] = list(self.chunk)
        return d

    def digest(self) -> str:
        payload = dict(self.to_dict(), engine=ENGINE_VERSION)
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------- sets


def is_special(s) -> tuple[bool, tuple[int, int, int] | None]:
    """Whether ``s = {l i + j : i < k, j < m}`` with ``m <= l``; returns the witness.

    ``s`` must already contain 0.  Blocks ``{0..N-1}`` get ``(N, 1, 1)``.
    """
    t = tuple(int(v) for v in s)
    if not t or t[0] != 0:
        return False, None
    run = 1
    while run < len(t) and t[run] == run:
        run += 1
    if run == len(t):
        return True, (len(t), 1, 1)
    if len(t) % run:
        return False, None
    l, k = t[run], len(t) // run
    expect = tuple(l * i + j for i in range(k) for j in range(run))
    return (True, (k, l, run)) if expect == t else (False, None)


def special_sets(n: int) -> list[tuple[tuple[int, ...], tuple[int, int, int]]]:
    """All distinct special sets with frequencies below ``n``, with witnesses."""
    seen = {}
    for m in range(1, n + 1):
        seen.setdefault(tuple(range(m)), (m, 1, 1))
    for l in range(2, n):
        for m in range(1, l + 1):
            k = 2
            while l * (k - 1) + m - 1 < n:
                t = tuple(l * i + j for i in range(k) for j in range(m))
                seen.setdefault(t, is_special(t)[1])
                k += 1
    return sorted(seen.items())


def ratio_for_table(s, config: SearchConfig) -> float:
    """Concentration of ``s`` on ``J``; at ``p = 1`` the plain quotient of integrals."""
    s = FrequencySet(s) if not isinstance(s, FrequencySet) else s
    if len(s) and s.max_freq >= config.n:
        raise DomainError(f"frequencies must be below n={config.n}")
    return concentration_ratio(s, config.target, config.p, config.tol).ratio


def ratio_convention(p: float) -> str:
    return "quotient" if p == 1.0 else "root-of-quotient"


# ---------------------------------------------------------------- grid


class NodeGrid:
    """Fixed quadrature nodes on ``J`` and on the full period for one config."""

    def __init__(self, config: SearchConfig):
        self.n = config.n
        self.p = config.p
        self.canonical = config.canonical_only
        span = max(config.n - 1, 1)
        xj, wj = [], []
        for a, b in config.target.intervals:
            cells = max(16, math.ceil(PANELS_PER_FREQ * span * (b - a)))
            x, w = _gl_nodes(a, b, cells)
            xj.append(x)
            wj.append(w)
        xf, wf = _gl_nodes(0.0, 1.0, PANELS_PER_FREQ * span)
        self.n_j = sum(x.size for x in xj)
        self.x = np.concatenate(xj + [xf])
        self.w_j = np.concatenate(wj)
        self.w_full = wf
        f = np.arange(config.n, dtype=float)
        ph = np.outer(f, self.x)
        ph -= np.rint(ph)
        self.rows = np.exp(2j * np.pi * ph)

    def freq_of_bit(self, bit):
        return bit + 1 if self.canonical else bit

    def fresh(self, code: int) -> np.ndarray:
        out = self.rows[0].copy() if self.canonical else np.zeros(self.x.size, dtype=complex)
        b = 0
        while code:
            if code & 1:
                out += self.rows[self.freq_of_bit(b)]
            code >>= 1
            b += 1
        return out

    def ratios(self, sums: np.ndarray) -> np.ndarray:
        mag = sums.real**2 + sums.imag**2
        if self.p == 1.0:
            np.sqrt(mag, out=mag)
        elif self.p != 2.0:
            mag **= self.p / 2.0
        num = mag[:, : self.n_j] @ self.w_j
        den = mag[:, self.n_j :] @ self.w_full
        with np.errstate(divide="ignore", invalid="ignore"):
            r = num / den
        if self.p != 1.0:
            r = r ** (1.0 / self.p)
        return r


def _gl_nodes(a: float, b: float, cells: int):
    edges = a + (b - a) * (np.arange(cells + 1, dtype=float) / cells)
    edges[-1] = b
    h = np.diff(edges)
    x = (edges[:-1, None] + h[:, None] * GL_TAU[None, :]).ravel()
    w = (h[:, None] * GL_WEIGHTS[None, :]).ravel()
    return x, w


def gray(i):
    return i ^ (i >> 1)


def _trailing_zeros(v: np.ndarray) -> np.ndarray:
    low = v & -v
    return np.log2(low.astype(float)).astype(np.int64)


def representative(s) -> tuple[int, ...]:
    """Smaller of the translated set and its reflection."""
    c = canonicalize(FrequencySet(s))
    return min(c.as_tuple(), reflect(c).as_tuple())


def code_to_set(code: int, canonical: bool) -> tuple[int, ...]:
    base = (0,) if canonical else ()
    shift = 1 if canonical else 0
    return base + tuple(b + shift for b in range(code.bit_length()) if code >> b & 1)


# ---------------------------------------------------------------- enumeration


def enumerate_chunk(
    config: SearchConfig,
    start: int,
    stop: int,
    sink: Callable[[np.ndarray, np.ndarray, np.ndarray], None],
    grid: NodeGrid | None = None,
) -> int:
    """Visit indices ``start..stop-1`` in Gray-code order.

    ``sink(indices, codes, sums)`` receives consecutive blocks: the subset
    indices, their Gray codes and the complex node sums (one row per
    subset, columns in ``grid.x`` order).  Returns the number of nonempty
    subsets visited.
    """
    if not (0 <= start < stop <= config.space):
        raise DomainError("chunk bounds out of range")
    grid = grid or NodeGrid(config)
    buf = np.empty((BLOCK, grid.x.size), dtype=complex)
    current = None
    count = 0
    for i0 in range(start, stop, BLOCK):
        i1 = min(i0 + BLOCK, stop)
        idx = np.arange(i0, i1, dtype=np.int64)
        codes = idx ^ (idx >> 1)
        rows = buf[: i1 - i0]
        if current is None or (i0 - start) % REFRESH == 0:
            rows[0] = grid.fresh(int(codes[0]))
            first = 1
        else:
            rows[0] = current
            first = 0
        steps = idx[first:]
        if steps.size:
            bits = _trailing_zeros(steps)
            signs = np.where((codes[first:] >> bits) & 1, 1.0, -1.0)
            rows[first:] = signs[:, None] * grid.rows[grid.freq_of_bit(bits)]
            if first == 0:
                rows[0] += current
        np.cumsum(rows, axis=0, out=rows)
        current = rows[-1].copy()
        count += int(np.count_nonzero(codes)) if not config.canonical_only else codes.size
        sink(idx, codes, rows)
    return count


def _rank_key(item):
    rep, score = item
    return (-score, rep)


def _merge_top(tops, k):
    best = {}
    for top in tops:
        for rep, score in top:
            rep = tuple(rep)
            if rep not in best or score > best[rep]:
                best[rep] = score
    return sorted(best.items(), key=_rank_key)[:k]


def _scan_chunk(config: SearchConfig, start: int, stop: int, grid: NodeGrid | None = None):
    grid = grid or NodeGrid(config)
    top: dict[tuple[int, ...], float] = {}
    k = config.top_k

    def sink(idx, codes, sums):
        r = grid.ratios(sums)
        valid = codes != 0 if not config.canonical_only else np.ones(codes.size, dtype=bool)
        r = np.where(valid, r, -np.inf)
        want = min(2 * k, r.size)
        pick = np.argpartition(-r, want - 1)[:want] if want < r.size else np.arange(r.size)
        for j in pick:
            if not np.isfinite(r[j]):
                continue
            rep = representative(code_to_set(int(codes[j]), config.canonical_only))
            score = float(r[j])
            if rep not in top or score > top[rep]:
                top[rep] = score
        if len(top) > 4 * k:
            keep = sorted(top.items(), key=_rank_key)[:k]
            top.clear()
            top.update(keep)

    count = enumerate_chunk(config, start, stop, sink, grid)
    return sorted(top.items(), key=_rank_key)[:k], count


_WORKER_GRID: dict = {}


def _worker_task(args):
    config, start, stop = args
    key = config.digest()
    grid = _WORKER_GRID.get(key)
    if grid is None:
        _WORKER_GRID.clear()
        grid = _WORKER_GRID[key] = NodeGrid(config)
    top, count = _scan_chunk(config, start, stop, grid)
    return start, stop, [(list(rep), score) for rep, score in top], count


# ---------------------------------------------------------------- checkpoint


def _write_checkpoint(path: str, config: SearchConfig, next_index: int, top, evaluated: int):
    payload = {
        "config_hash": config.digest(),
        "config": config.to_dict(),
        "next_index": next_index,
        "evaluated": evaluated,
        "top": [[list(rep), score] for rep, score in top],
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _read_checkpoint(path: str, config: SearchConfig):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("config_hash") != config.digest():
        raise DomainError("checkpoint was written for a different search configuration")
    top = [(tuple(rep), float(score)) for rep, score in data["top"]]
    return int(data["next_index"]), top, int(data["evaluated"])


# ---------------------------------------------------------------- report


@dataclass(frozen=True)
class Scored:
    freqs: tuple[int, ...]
    ratio: float
    special: bool
    witness: tuple[int, int, int] | None

    def to_dict(self) -> dict:
        return {
            "freqs": list(self.freqs),
            "ratio": self.ratio,
            "special": self.special,
            "witness": list(self.witness) if self.witness else None,
        }


@dataclass(frozen=True)
class SearchReport:
    config: SearchConfig
    best: Scored
    best_special: Scored
    c_estimate: float
    candidates_evaluated: int
    convention: str
    finalists: tuple[Scored, ...] = field(default=(), compare=False)

    @property
    def best_set(self) -> FrequencySet:
        return FrequencySet(self.best.freqs)

    @property
    def best_ratio(self) -> float:
        return self.best.ratio

    @property
    def best_special_set(self) -> FrequencySet:
        return FrequencySet(self.best_special.freqs)

    @property
    def best_special_ratio(self) -> float:
        return self.best_special.ratio

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "best": self.best.to_dict(),
            "best_special": self.best_special.to_dict(),
            "c": self.c_estimate,
            "evaluated": self.candidates_evaluated,
            "convention": self.convention,
        }


def pick_best(entries, tie_rtol: float):
    """Highest ratio; entries within ``tie_rtol`` of it tie and the smallest set wins."""
    top = max(e.ratio for e in entries)
    tied = [e for e in entries if e.ratio >= top * (1.0 - tie_rtol)]
    return min(tied, key=lambda e: e.freqs)


def _score(config: SearchConfig, freqs, witness=None) -> Scored:
    freqs = tuple(freqs)
    ratio = concentration_ratio(FrequencySet(freqs), config.target, config.p, config.tol).ratio
    if witness is None:
        special, witness = is_special(freqs)
    else:
        special = True
    return Scored(freqs=freqs, ratio=ratio, special=special, witness=witness)


def tie_tolerance(config: SearchConfig) -> float:
    # numerator and denominator each carry a relative error up to tol
    return 4.0 * config.tol


def finalize(config: SearchConfig, top, evaluated: int) -> SearchReport:
    """Polish the stage-1 finalists and the special sets; build the report."""
    specials = [_score(config, t, w) for t, w in special_sets(config.n)]
    by_set = {s.freqs: s for s in specials}
    finalists = [by_set.get(tuple(rep)) or _score(config, rep) for rep, _ in top]
    rtol = tie_tolerance(config)
    best = pick_best(finalists + specials, rtol)
    best_special = pick_best(specials, rtol)
    if best.special:
        c = 1.0
    else:
        # a special set inside the tie window that lost on lexicographic order
        c = min(1.0, best_special.ratio / best.ratio)
    return SearchReport(
        config=config,
        best=best,
        best_special=best_special,
        c_estimate=c,
        candidates_evaluated=evaluated,
        convention=ratio_convention(config.p),
        finalists=tuple(sorted(finalists, key=lambda s: (-s.ratio, s.freqs))),
    )


def run_search(
    config: SearchConfig,
    threads: int = 1,
    checkpoint: str | None = None,
    resume: bool = False,
    progress: Callable[[int, int], None] | None = None,
) -> SearchReport:
    """Enumerate the configured chunk of ``P_n`` and report the winners."""
    lo, hi = config.chunk
    top: list = []
    evaluated = 0
    next_index = lo
    if resume:
        if not checkpoint:
            raise DomainError("--resume needs a checkpoint path")
        if os.path.exists(checkpoint):
            next_index, top, evaluated = _read_checkpoint(checkpoint, config)
    # chunk edges sit on multiples of CHUNK so worker count never moves them
    edges = [next_index] + list(range((next_index // CHUNK + 1) * CHUNK, hi, CHUNK)) + [hi]
    tasks = [(config, a, b) for a, b in zip(edges[:-1], edges[1:]) if a < b]
    last_saved = next_index

    def absorb(result):
        nonlocal top, evaluated, next_index, last_saved
        _, stop, chunk_top, count = result
        top = _merge_top([top, chunk_top], config.top_k)
        evaluated += count
        next_index = stop
        if checkpoint and (next_index - last_saved >= CHECKPOINT_EVERY or next_index == hi):
            _write_checkpoint(checkpoint, config, next_index, top, evaluated)
            last_saved = next_index
        if progress:
            progress(next_index - lo, hi - lo)

    if threads <= 1 or len(tasks) <= 1:
        for task in tasks:
            absorb(_worker_task(task))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for result in pool.map(_worker_task, tasks):
                absorb(result)
    top = [(tuple(rep), score) for rep, score in top]
    return finalize(config, top, evaluated)
