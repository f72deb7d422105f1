"""
Random words, exactly uniform random elements of given weighted length, and
counting oracles.

Exact uniform sampling walks the left normal form from left to right.  A
normal form is a sequence of non-identity simples with left-weighted adjacent
pairs (leading Deltas are allowed automatically because ``comp(Delta)`` is the
identity), so the number of elements of weight ``k`` is the number of such
sequences of total length ``k``.  Simples with the same set of left-weighted
successors are interchangeable as predecessors, which keeps the count table
small: one row per successor class instead of one per simple.

Randomness: every draw ``i`` of a sample with seed ``seed`` uses its own
``numpy`` PCG64 stream seeded by ``SeedSequence(seed, spawn_key=(i,))`` (see
:class:`RandomStream`), so a
sample can be split into chunks and generated in any order or in parallel
with identical results.
"""
from __future__ import annotations

import bisect
import concurrent.futures
import dataclasses
import itertools
import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__
from .core import CanonicalForm, GarsideStructure, Simple
from .errors import CapacityError, DomainError, ParseError, UsageError
from .normalform import AtomWord, normal_form_linear

RNG_NAME = "numpy.PCG64 raw 64-bit, SeedSequence(seed, spawn_key=(index,))"
MAX_TABLE_CELLS = 50_000_000
MAX_BRUTE_FORCE_WORDS = 10_000_000
METHODS = ("word", "urb")

# float cumulative probabilities are within this of the exact ones
_FLOAT_SLACK = 1e-12


class RandomStream:
    """Exact random primitives over one PCG64 stream of 64-bit words.

    Draw ``index`` of a sample seeded with ``seed`` reads the stream of
    ``SeedSequence(seed, spawn_key=(index,))``.  Doubles take the top 53 bits
    of a word; bounded integers use rejection, so they are exactly uniform.
    """

    _BATCH = 256

    def __init__(self, seed: int, index: int = 0):
        if seed < 0 or index < 0:
            raise UsageError("seed and index must be non-negative")
        self.bitgen = np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,)))
        self._buf: list[int] = []

    def raw(self) -> int:
        if not self._buf:
            self._buf = self.bitgen.random_raw(self._BATCH).tolist()[::-1]
        return self._buf.pop()

    def random(self) -> float:
        return (self.raw() >> 11) * 2.0 ** -53

    def below(self, m: int) -> int:
        """Uniform integer in ``[0, m)``."""
        if m <= 0:
            raise UsageError("empty range")
        if m > 1 << 64:
            return uniform_below(m, self)
        limit = (1 << 64) - (1 << 64) % m
        while True:
            v = self.raw()
            if v < limit:
                return v % m

    def bits(self, nbits: int) -> int:
        """Uniform integer with ``nbits`` random bits."""
        v, have = 0, 0
        while have < nbits:
            v = v << 64 | self.raw()
            have += 64
        return v >> (have - nbits)


def item_rng(seed: int, index: int) -> RandomStream:
    """Random stream for draw ``index`` of a sample seeded with ``seed``."""
    return RandomStream(seed, index)


# -- words --------------------------------------------------------------------

def sample_word(g: GarsideStructure, k: int, rng: RandomStream) -> AtomWord:
    """Independent uniform atoms until the total weight reaches ``k``.

    With atoms of different weights a draw that overshoots ``k`` restarts the
    word, which keeps the measure uniform on atom words of weight exactly ``k``.
    """
    if k < 0:
        raise UsageError("k must be non-negative")
    atoms = g.atoms
    weights = [g.length[a] for a in atoms]
    m = len(atoms)
    if all(w == 1 for w in weights):
        return AtomWord(g, tuple(atoms[rng.below(m)] for _ in range(k)))
    if k % math.gcd(*weights):
        raise DomainError(f"no atom word of weight {k} in {g.name}")
    while True:
        letters: list[Simple] = []
        total = 0
        while total < k:
            a = atoms[rng.below(m)]
            letters.append(a)
            total += g.length[a]
        if total == k:
            return AtomWord(g, tuple(letters))


# -- counting -----------------------------------------------------------------

class LengthCountTable:
    """Exact counts of normal-form continuations.

    ``count(s, r)`` is the number of sequences ``t_1 ... t_m`` of
    non-identity simples with ``(s, t_1)`` and all later adjacent pairs
    left-weighted and total length ``r``.  ``count(s, 0) == 1``.
    """

    def __init__(self, g: GarsideStructure, k_max: int, max_cells: int = MAX_TABLE_CELLS):
        g.require_tables()
        if k_max < 0:
            raise UsageError("k must be non-negative")
        self.structure = g
        self.k_max = k_max
        E = g.identity
        nonid = [t for t in g.simples if t != E]
        succ_of: dict[frozenset, int] = {}
        self.class_of: list[int] = [-1] * g.size
        self.class_members: list[list[Simple]] = []
        for s in nonid:
            key = frozenset(t for t in nonid if g.is_left_weighted(s, t))
            c = succ_of.setdefault(key, len(succ_of))
            if c == len(self.class_members):
                self.class_members.append([])
            self.class_members[c].append(s)
            self.class_of[s] = c
        classes = list(succ_of)
        if len(classes) * (k_max + 1) > max_cells:
            raise CapacityError(
                f"count table {len(classes)} x {k_max + 1} exceeds max-table-cells={max_cells}")
        # groups[c] lists (successor class, length, members) for successors of class c
        self.groups: list[list[tuple[int, int, tuple[Simple, ...]]]] = []
        for key in classes:
            by: dict[tuple[int, int], list[Simple]] = {}
            for t in sorted(key):
                by.setdefault((self.class_of[t], g.length[t]), []).append(t)
            self.groups.append([(c2, L, tuple(ts)) for (c2, L), ts in sorted(by.items())])
        self.table: list[list[int]] = [[0] * (k_max + 1) for _ in classes]
        for c in range(len(classes)):
            self.table[c][0] = 1
        for r in range(1, k_max + 1):
            for c, grp in enumerate(self.groups):
                total = 0
                for c2, L, ts in grp:
                    if L <= r:
                        total += len(ts) * self.table[c2][r - L]
                self.table[c][r] = total
        self._cum_cache: dict[tuple[int, int], tuple[list[float], list[tuple[int, int, tuple]]]] = {}

    @property
    def counts(self) -> dict[tuple[Simple, int], int]:
        """The full map ``(simple, r) -> count`` (expanded from the class table)."""
        g = self.structure
        return {(s, r): self.table[self.class_of[s]][r]
                for s in g.simples if s != g.identity for r in range(self.k_max + 1)}

    def count(self, s: Simple, r: int) -> int:
        if not 0 <= r <= self.k_max:
            raise UsageError(f"r={r} outside 0..{self.k_max}")
        return self.table[self.class_of[s]][r]

    def total(self, k: int) -> int:
        """Number of elements of weighted length ``k``."""
        return self.count(self.structure.delta, k)

    def _choices(self, c: int, r: int):
        key = (c, r)
        hit = self._cum_cache.get(key)
        if hit is not None:
            return hit
        total = self.table[c][r]
        shift = max(0, total.bit_length() - 96)
        denom = total >> shift
        opts = []
        cum = []
        acc = 0
        for c2, L, ts in self.groups[c]:
            if L > r:
                continue
            w = len(ts) * self.table[c2][r - L]
            if w == 0:
                continue
            acc += w
            opts.append((c2, L, ts, w))
            cum.append((acc >> shift) / denom)
        hit = (cum, opts)
        self._cum_cache[key] = hit
        return hit

    def _pick(self, c: int, r: int, rng: RandomStream):
        cum, opts = self._choices(c, r)
        u = rng.random()
        j = bisect.bisect_right(cum, u)
        lo = cum[j - 1] if j > 0 else 0.0
        hi = cum[j] if j < len(cum) else 1.0
        if u - lo <= _FLOAT_SLACK or hi - u <= _FLOAT_SLACK + 2.0 ** -53:
            j = self._pick_exact(self.table[c][r], opts, int(u * 2.0 ** 53), rng)
        return opts[min(j, len(opts) - 1)]

    @staticmethod
    def _pick_exact(total: int, opts, num: int, rng: RandomStream) -> int:
        # The uniform variate lies in [num, num + 1) / 2**bits; append random
        # bits until that interval sits inside one exact cumulative bucket.
        bits = 53
        while True:
            lo, hi = num * total, (num + 1) * total
            acc = 0
            for j, o in enumerate(opts):
                start, acc = acc, acc + o[3]
                if start << bits <= lo and hi <= acc << bits:
                    return j
            num = (num << 64) | rng.raw()
            bits += 64


def uniform_below(n: int, rng: RandomStream) -> int:
    """Exactly uniform integer in ``[0, n)`` for arbitrary-size ``n``."""
    if n <= 0:
        raise UsageError("empty range")
    bits = (n - 1).bit_length()
    while True:
        v = rng.bits(bits)
        if v < n:
            return v


def count_elements(g: GarsideStructure, k: int, table: LengthCountTable | None = None) -> int:
    """Number of monoid elements of weighted length ``k``."""
    if k < 0:
        raise UsageError("k must be non-negative")
    if table is None or table.k_max < k:
        table = LengthCountTable(g, k)
    return table.total(k)


def sample_urb(g: GarsideStructure, k: int, rng: RandomStream,
               table: LengthCountTable | None = None) -> CanonicalForm:
    """Exactly uniform element of weighted length ``k``, in normal form."""
    if table is None or table.k_max < k:
        table = LengthCountTable(g, k)
    if table.total(k) == 0:
        raise DomainError(f"no element of weighted length {k} in {g.name}")
    c = table.class_of[g.delta]
    r = k
    factors: list[Simple] = []
    while r > 0:
        c, L, ts, _ = table._pick(c, r, rng)
        factors.append(ts[rng.below(len(ts))] if len(ts) > 1 else ts[0])
        r -= L
    inf = 0
    while inf < len(factors) and factors[inf] == g.delta:
        inf += 1
    return CanonicalForm(g, inf, tuple(factors[inf:]))


def brute_force_elements(g: GarsideStructure, k: int,
                         guard: int = MAX_BRUTE_FORCE_WORDS) -> list[CanonicalForm]:
    """All distinct elements of weight ``k``, by normalising every atom word."""
    if k < 0:
        raise UsageError("k must be non-negative")
    atoms = g.atoms
    weights = {a: g.length[a] for a in atoms}
    if _word_count(weights, k) > guard:
        raise CapacityError(f"more than {guard} atom words of weight {k}")
    out: set[CanonicalForm] = set()

    def rec(prefix: list[Simple], total: int):
        if total == k:
            out.add(normal_form_linear(AtomWord(g, tuple(prefix))))
            return
        for a in atoms:
            if total + weights[a] <= k:
                prefix.append(a)
                rec(prefix, total + weights[a])
                prefix.pop()

    rec([], 0)
    return sorted(out, key=lambda x: (x.inf, x.factors))


def _word_count(weights: dict[Simple, int], k: int) -> int:
    ways = [1] + [0] * k
    for r in range(1, k + 1):
        ways[r] = sum(ways[r - w] for w in weights.values() if w <= r)
    return ways[k]


# -- sample sets --------------------------------------------------------------

@dataclasses.dataclass
class SampleSet:
    method: str
    structure: GarsideStructure = dataclasses.field(repr=False)
    k: int
    seed: int
    items: list[CanonicalForm]
    config: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}")

    @property
    def n(self):
        return self.structure.n

    def __len__(self):
        return len(self.items)

    def header(self) -> dict:
        g = self.structure
        head = {
            "method": self.method,
            "structure": g.name,
            "n": g.n,
            "k": self.k,
            "seed": self.seed,
            "rng": RNG_NAME,
            "count": len(self.items),
            "version": __version__,
            "fingerprint": g.fingerprint(),
            "config": self.config,
        }
        if self.method == "word" and getattr(g, "kind", None) == "bkl":
            head["note"] = "word sampling over band generators (extension)"
        return head

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for x in self.items:
                fh.write(json.dumps(x.to_json(), separators=(",", ":")) + "\n")

    @classmethod
    def read_jsonl(cls, path: str | Path, g: GarsideStructure | None = None) -> "SampleSet":
        """Read a sample file; builds the structure from the header unless given."""
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise ParseError("empty sample file", 1)
        try:
            head = json.loads(lines[0])
        except json.JSONDecodeError as e:
            raise ParseError(f"bad header: {e}", 1) from None
        for key in ("method", "structure", "k", "seed", "count"):
            if not isinstance(head, dict) or key not in head:
                raise ParseError(f"header lacks {key!r}", 1)
        if g is None:
            g = structure_from_name(head["structure"])
        if g.name != head["structure"]:
            raise ParseError(f"sample is for {head['structure']}, not {g.name}", 1)
        if "fingerprint" in head and head["fingerprint"] != g.fingerprint():
            raise ParseError("structure fingerprint mismatch", 1)
        items = []
        for i, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                x = CanonicalForm.from_json(g, json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ParseError(f"bad record: {e}", i) from None
            if not x.is_valid():
                raise ParseError("record is not a normal form", i)
            if x.weighted_length() != head["k"]:
                raise ParseError(f"record has weighted length {x.weighted_length()}, expected {head['k']}", i)
            items.append(x)
        if len(items) != head["count"]:
            raise ParseError(f"header announces {head['count']} records, found {len(items)}", len(lines))
        return cls(head["method"], g, head["k"], head["seed"], items, head.get("config", {}))


def structure_from_name(name: str) -> GarsideStructure:
    """Inverse of ``GarsideStructure.name`` for the shipped families."""
    from .structures import build_structure
    for kind in ("classical", "bkl"):
        if name.startswith(kind) and name[len(kind):].isdigit():
            return build_structure(kind, int(name[len(kind):]))
    if name == "g1":
        return build_structure("g1")
    raise ParseError(f"unknown structure {name!r}", 1)


def draw(g: GarsideStructure, method: str, k: int, seed: int, index: int,
         table: LengthCountTable | None = None) -> CanonicalForm:
    """Draw ``index`` of the sample ``(method, k, seed)``."""
    rng = item_rng(seed, index)
    if method == "word":
        return normal_form_linear(sample_word(g, k, rng))
    if method == "urb":
        return sample_urb(g, k, rng, table)
    raise UsageError(f"unknown method {method!r}")


def _draw_range(args) -> list[tuple[int, tuple[Simple, ...]]]:
    # plain tuples: forms built in a worker would point at a copy of the structure
    g, method, k, seed, start, stop, table = args
    return [(x.inf, x.factors) for x in (draw(g, method, k, seed, i, table) for i in range(start, stop))]


def chunk_bounds(count: int, chunks: int) -> list[tuple[int, int]]:
    chunks = max(1, min(chunks, count)) if count else 1
    step, extra = divmod(count, chunks)
    out, start = [], 0
    for c in range(chunks):
        stop = start + step + (c < extra)
        out.append((start, stop))
        start = stop
    return out


def make_sample(g: GarsideStructure, method: str, k: int, count: int, seed: int,
                workers: int = 1, config: dict | None = None) -> SampleSet:
    """Generate ``count`` draws; the result does not depend on ``workers``."""
    if count < 0:
        raise UsageError("count must be non-negative")
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    table = None
    if method == "urb":
        table = LengthCountTable(g, k)
        if table.total(k) == 0:
            raise DomainError(f"no element of weighted length {k} in {g.name}")
    bounds = chunk_bounds(count, workers * 4 if workers > 1 else 1)
    jobs = [(g, method, k, seed, a, b, table) for a, b in bounds]
    if workers > 1 and count > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_draw_range, jobs))
    else:
        parts = [_draw_range(j) for j in jobs]
    items = [CanonicalForm(g, inf, f) for inf, f in itertools.chain.from_iterable(parts)]
    return SampleSet(method, g, k, seed, items, dict(config or {}))


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
