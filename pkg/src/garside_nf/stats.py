"""
Statistics over samples of normal forms: per-position factor statistics,
stable-region detection, penetration-distance statistics and helpers for
the CSV outputs.

All aggregates hold exact integer sums, so merging chunk results is
associative and commutative and does not depend on the order of items.
"""
from __future__ import annotations

import collections
import csv
import dataclasses
import io
import json
import math
from typing import Iterable, Sequence

import numpy as np

from .core import CanonicalForm, GarsideStructure, check_same_structure
from .errors import DomainError, UsageError
from .normalform import pd_fast
from .sampling import SampleSet

ORIENTATIONS = ("left", "right")
W_MIN = 10
ACCEPT_FRACTION = 0.1
MIN_SUPPORT = 1.0


def fmt(v) -> str:
    """Six significant digits, plain ASCII."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


# -- per-position statistics --------------------------------------------------

def _atom_bits(g: GarsideStructure, masks: Sequence[int]) -> np.ndarray:
    m = g.num_atoms
    return np.array([[mask >> a & 1 for a in range(m)] for mask in masks], dtype=np.int64).reshape(-1, m)


@dataclasses.dataclass
class PositionStats:
    """Per-position aggregates; position ``i`` (1-based) is stored at index ``i-1``.

    ``counts[i]`` items have a factor at position ``i``; positions beyond every
    item's canonical length are not stored at all.  Sums are exact int64.
    """

    orientation: str
    num_atoms: int
    counts: np.ndarray = None
    len_sum: np.ndarray = None
    start_hits: np.ndarray = None
    finish_hits: np.ndarray = None

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise UsageError(f"orientation must be one of {ORIENTATIONS}")
        if self.counts is None:
            self.counts = np.zeros(0, dtype=np.int64)
            self.len_sum = np.zeros(0, dtype=np.int64)
            self.start_hits = np.zeros((0, self.num_atoms), dtype=np.int64)
            self.finish_hits = np.zeros((0, self.num_atoms), dtype=np.int64)

    @property
    def positions(self) -> int:
        return len(self.counts)

    def _grow(self, p: int) -> None:
        extra = p - len(self.counts)
        if extra > 0:
            m = self.num_atoms
            self.counts = np.concatenate([self.counts, np.zeros(extra, dtype=np.int64)])
            self.len_sum = np.concatenate([self.len_sum, np.zeros(extra, dtype=np.int64)])
            self.start_hits = np.vstack([self.start_hits, np.zeros((extra, m), dtype=np.int64)])
            self.finish_hits = np.vstack([self.finish_hits, np.zeros((extra, m), dtype=np.int64)])

    def add_all(self, g: GarsideStructure, items: Iterable[CanonicalForm]) -> None:
        length = np.asarray(g.length, dtype=np.int64)
        sbits, fbits = _atom_bits(g, g.start_mask), _atom_bits(g, g.finish_mask)
        for x in items:
            if not x.factors:
                continue
            f = np.fromiter(x.factors if self.orientation == "left" else reversed(x.factors),
                            dtype=np.int64, count=len(x.factors))
            cl = len(f)
            if cl > len(self.counts):
                self._grow(max(cl, 2 * len(self.counts)))
            self.counts[:cl] += 1
            self.len_sum[:cl] += length[f]
            self.start_hits[:cl] += sbits[f]
            self.finish_hits[:cl] += fbits[f]
        self._trim()

    def add(self, g: GarsideStructure, x: CanonicalForm) -> None:
        self.add_all(g, [x])

    def _trim(self) -> None:
        nz = np.flatnonzero(self.counts)
        p = int(nz[-1]) + 1 if len(nz) else 0
        self.counts, self.len_sum = self.counts[:p], self.len_sum[:p]
        self.start_hits, self.finish_hits = self.start_hits[:p], self.finish_hits[:p]

    def merge(self, other: "PositionStats") -> "PositionStats":
        if (other.orientation, other.num_atoms) != (self.orientation, self.num_atoms):
            raise UsageError("cannot merge statistics of different shape")
        out = PositionStats(self.orientation, self.num_atoms)
        out._grow(max(self.positions, other.positions))
        for src in (self, other):
            p = src.positions
            out.counts[:p] += src.counts
            out.len_sum[:p] += src.len_sum
            out.start_hits[:p] += src.start_hits
            out.finish_hits[:p] += src.finish_hits
        return out

    def __eq__(self, other):
        if not isinstance(other, PositionStats):
            return NotImplemented
        return (self.orientation == other.orientation and self.num_atoms == other.num_atoms
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("counts", "len_sum", "start_hits", "finish_hits")))

    @property
    def mean_len(self) -> np.ndarray:
        return self.len_sum / self.counts

    @property
    def start_freq(self) -> np.ndarray:
        """Array of shape (positions, atoms)."""
        return self.start_hits / self.counts[:, None]

    @property
    def finish_freq(self) -> np.ndarray:
        return self.finish_hits / self.counts[:, None]

    def monitored(self) -> dict[str, np.ndarray]:
        """Mean length and every per-atom starting and finishing frequency."""
        out = {"LEN": self.mean_len}
        sf, ff = self.start_freq, self.finish_freq
        for a in range(self.num_atoms):
            out[f"start{a + 1}"] = sf[:, a]
        for a in range(self.num_atoms):
            out[f"finish{a + 1}"] = ff[:, a]
        return out

    def mean_len_csv(self) -> str:
        rows = ["pos,LEN"]
        rows += [f"{i + 1},{fmt(v)}" for i, v in enumerate(self.mean_len)]
        return "\n".join(rows) + "\n"

    def freq_csv(self, which: str) -> str:
        arr = {"start": self.start_freq, "finish": self.finish_freq}[which]
        head = "pos," + ",".join(f"gen{a + 1}" for a in range(self.num_atoms))
        rows = [head] + [f"{i + 1}," + ",".join(fmt(v) for v in row) for i, row in enumerate(arr)]
        return "\n".join(rows) + "\n"


def position_stats(sample: SampleSet | Iterable[CanonicalForm], orientation: str = "left",
                   g: GarsideStructure | None = None) -> PositionStats:
    items = sample.items if isinstance(sample, SampleSet) else list(sample)
    if not items:
        raise DomainError("empty sample")
    g = g or items[0].structure
    out = PositionStats(orientation, g.num_atoms)
    out.add_all(g, items)
    return out


# -- stable regions -----------------------------------------------------------

@dataclasses.dataclass
class StableRegion:
    """Interval ``[start, end]`` of positions, or empty (``start is None``)."""

    start: int | None
    end: int | None
    ratio: float | None = None
    data_range: float | None = None
    fitted_range: float | None = None
    accepted: bool = False
    parts: dict = dataclasses.field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.start is None

    def to_json(self) -> dict:
        d = {"start": self.start, "end": self.end, "ratio": self.ratio,
             "data_range": self.data_range, "fitted_range": self.fitted_range,
             "accepted": self.accepted}
        if self.parts:
            d["parts"] = {k: v.to_json() for k, v in self.parts.items()}
        return d


EMPTY = StableRegion(None, None)


def stable_region(f: Sequence[float], w_min: int = W_MIN, first_position: int = 1) -> StableRegion:
    """Interval minimising ``(max f - min f) / (p2 - p1)`` over intervals with
    at least ``w_min`` positions, accepted if the least-squares trend over it
    is small against its range.

    Ties go to the widest, then leftmost interval.  An interval on which ``f``
    is constant is always accepted.
    """
    y = np.asarray(f, dtype=float)
    P = len(y)
    if w_min < 2:
        raise UsageError("w_min must be at least 2")
    if P < w_min:
        raise DomainError(f"{P} positions, fewer than w_min={w_min}")
    best = (math.inf, 0, 0)  # ratio, -width, p1 ; minimised lexicographically
    for p1 in range(P - w_min + 1):
        tail = y[p1:]
        rng = np.maximum.accumulate(tail) - np.minimum.accumulate(tail)
        widths = np.arange(len(tail), dtype=float)
        ratios = rng[w_min - 1:] / widths[w_min - 1:]
        j = int(np.argmin(ratios[::-1]))  # widest among minimisers
        j = len(ratios) - 1 - j
        r = float(ratios[j])
        width = j + w_min - 1
        cand = (r, -width, p1)
        if cand < best:
            best = cand
    r, negw, p1 = best
    p2 = p1 + (-negw)
    seg = y[p1:p2 + 1]
    data_range = float(seg.max() - seg.min())
    xs = np.arange(p1, p2 + 1, dtype=float)
    slope = float(np.polyfit(xs, seg, 1)[0])
    fitted = abs(slope) * (p2 - p1)
    accepted = data_range == 0 or fitted < ACCEPT_FRACTION * data_range
    region = StableRegion(p1 + first_position, p2 + first_position, r, data_range, fitted, accepted)
    if not accepted:
        region = dataclasses.replace(region, start=None, end=None)
    return region


def supported_positions(stats: PositionStats, min_support: float = MIN_SUPPORT) -> int:
    """Number of leading positions reached by at least ``min_support`` of the items."""
    if not stats.positions:
        return 0
    return int(np.count_nonzero(stats.counts >= min_support * stats.counts[0]))


def sample_stable_region(stats: PositionStats, w_min: int = W_MIN,
                         min_support: float = MIN_SUPPORT) -> StableRegion:
    """Intersection of the stable regions of every monitored function.

    Only positions reached by at least ``min_support`` of the items take part;
    beyond them the statistics describe a shrinking, length-biased subsample.
    """
    P = supported_positions(stats, min_support)
    if P < w_min:
        raise DomainError(f"only {P} positions reach support {min_support}, fewer than w_min={w_min}")
    parts = {name: stable_region(f[:P], w_min) for name, f in stats.monitored().items()}
    starts = [p.start for p in parts.values()]
    ends = [p.end for p in parts.values()]
    if any(s is None for s in starts):
        return StableRegion(None, None, parts=parts)
    lo, hi = max(starts), min(ends)
    if lo > hi:
        return StableRegion(None, None, parts=parts)
    return StableRegion(lo, hi, accepted=True, parts=parts)


def stable_region_csv(rows: Iterable[tuple]) -> str:
    out = ["k,n,method,start,end"]
    for k, n, method, region in rows:
        s = "" if region.empty else str(region.start)
        e = "" if region.empty else str(region.end)
        out.append(f"{k},{'' if n is None else n},{method},{s},{e}")
    return "\n".join(out) + "\n"


# -- penetration distance ----------------------------------------------------

@dataclasses.dataclass
class PdStats:
    num_atoms: int
    hist: collections.Counter = dataclasses.field(default_factory=collections.Counter)
    per_atom_sum: list[int] = dataclasses.field(default_factory=list)
    items: int = 0

    def __post_init__(self):
        if not self.per_atom_sum:
            self.per_atom_sum = [0] * self.num_atoms

    @property
    def total(self) -> int:
        return sum(self.hist.values())

    @property
    def mean_pd(self) -> float:
        t = self.total
        return sum(d * c for d, c in self.hist.items()) / t if t else 0.0

    @property
    def mean_pd_per_atom(self) -> list[float]:
        return [s / self.items if self.items else 0.0 for s in self.per_atom_sum]

    @property
    def histogram(self) -> dict[int, float]:
        t = self.total
        return {d: c / t for d, c in sorted(self.hist.items())} if t else {}

    @property
    def max_pd(self) -> int:
        return max(self.hist) if self.hist else 0

    def merge(self, other: "PdStats") -> "PdStats":
        if other.num_atoms != self.num_atoms:
            raise UsageError("cannot merge statistics of different shape")
        return PdStats(self.num_atoms, self.hist + other.hist,
                       [a + b for a, b in zip(self.per_atom_sum, other.per_atom_sum)],
                       self.items + other.items)

    def hist_csv(self) -> str:
        return "pd,freq\n" + "".join(f"{d},{fmt(v)}\n" for d, v in self.histogram.items())

    def per_atom_csv(self) -> str:
        return "gen,mean_pd\n" + "".join(
            f"gen{a + 1},{fmt(v)}\n" for a, v in enumerate(self.mean_pd_per_atom))

    def to_json(self) -> dict:
        return {"mean_pd": self.mean_pd, "mean_pd_per_atom": self.mean_pd_per_atom,
                "histogram": {str(k): v for k, v in self.histogram.items()}, "max_pd": self.max_pd}


def pd_stats(sample: SampleSet | Iterable[CanonicalForm], g: GarsideStructure | None = None) -> PdStats:
    """Penetration distance of ``x * a`` for every item ``x`` and atom ``a``."""
    items = sample.items if isinstance(sample, SampleSet) else list(sample)
    if g is None:
        g = sample.structure if isinstance(sample, SampleSet) else (items[0].structure if items else None)
    if g is None:
        raise UsageError("structure needed for an empty sample")
    out = PdStats(g.num_atoms)
    hist = out.hist
    for x in items:
        for ai, a in enumerate(g.atoms):
            d = pd_fast(g, x.factors, a)
            hist[d] += 1
            out.per_atom_sum[ai] += d
        out.items += 1
    return out


# -- distances and fits -------------------------------------------------------

def distribution_distance(sample_a: SampleSet, sample_b: SampleSet, i: int) -> float:
    """Total-variation distance between the laws of the i-th factor (from the left)."""
    check_same_structure(sample_a, sample_b)
    if not sample_a.items or not sample_b.items:
        raise DomainError("empty sample")
    ca = collections.Counter(x.lam(i) for x in sample_a.items)
    cb = collections.Counter(x.lam(i) for x in sample_b.items)
    na, nb = len(sample_a.items), len(sample_b.items)
    return 0.5 * sum(abs(ca[s] / na - cb[s] / nb) for s in set(ca) | set(cb))


@dataclasses.dataclass
class PowerFit:
    c: float
    log_const: float
    residual_rms: float

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def power_fit(pairs: Sequence[tuple[float, float]]) -> PowerFit:
    """Least-squares fit of ``log mean = c log n + const``."""
    if len(pairs) < 3:
        raise DomainError("power_fit needs at least 3 pairs")
    n = np.array([p[0] for p in pairs], dtype=float)
    v = np.array([p[1] for p in pairs], dtype=float)
    if np.any(n <= 0) or np.any(v <= 0):
        raise DomainError("power_fit needs positive values")
    x, y = np.log(n), np.log(v)
    c, b = np.polyfit(x, y, 1)
    resid = y - (c * x + b)
    return PowerFit(float(c), float(b), float(np.sqrt(np.mean(resid ** 2))))


def with_metadata(meta: dict, body: str) -> str:
    """Prefix a CSV body with a one-line ``#`` JSON metadata record."""
    return "# " + json.dumps(meta, sort_keys=True) + "\n" + body


def read_csv_body(text: str) -> list[list[str]]:
    """Parse a CSV written by this package, skipping the metadata line."""
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(lines))))
