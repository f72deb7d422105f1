"""
Transfer matrices for penetration sequences and normal forms, exact count
series, rational generating functions and exponential growth rates.

A penetration sequence is a walk in the pair-state graph: states are pairs
``(s, m)`` of simples other than the identity and Delta with ``s*m`` simple,
and ``(s1, m1) -> (s2, m2)`` is an edge iff ``s2*m2 != Delta``, ``(s1, s2)`` is
left-weighted and ``m1 == comp(s1) ^ (s2*m2)``.  Elements with infimum 0 and
canonical length ``k`` are walks of ``k`` proper simples in the
left-weighting graph.  Both counts are ``1 * M^(k-1) * 1``.

Series are computed on the coarsest lumping of the graph (states with equal
successor counts into every block are merged), which preserves all counts
and bounds the order of the recurrence by the number of blocks.
"""
from __future__ import annotations

import dataclasses
import graphlib
import json
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import GarsideStructure, Simple
from .errors import CapacityError, NeedsMoreTermsError, UsageError

MAX_STATES = 20_000
MAX_SERIES_TERMS = 5_000
CAUCHY_HADAMARD_TERMS = 200
POLE_TOLERANCE = 1e-6


@dataclasses.dataclass(frozen=True)
class PairState:
    s: Simple
    m: Simple


@dataclasses.dataclass
class TransferMatrix:
    """0/1 matrix stored as successor lists over ``states``."""

    states: list
    succ: list[list[int]]
    kind: str = ""

    @property
    def dim(self) -> int:
        return len(self.states)

    def entry(self, i: int, j: int) -> int:
        return int(j in self.succ[i])

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim), dtype=np.int64)
        for i, row in enumerate(self.succ):
            a[i, row] = 1
        return a

    @property
    def edges(self) -> int:
        return sum(len(r) for r in self.succ)


def pair_states(g: GarsideStructure) -> list[PairState]:
    g.require_tables()
    E, D = g.identity, g.delta
    proper = [s for s in g.simples if s not in (E, D)]
    return [PairState(s, m) for s in proper for m in proper if g.mul(s, m) >= 0]


def build_pseq_matrix(g: GarsideStructure, max_states: int = MAX_STATES) -> TransferMatrix:
    states = pair_states(g)
    if len(states) > max_states:
        raise CapacityError(f"{g.name}: {len(states)} pair states exceed max-states={max_states}")
    D = g.delta
    index = {(p.s, p.m): i for i, p in enumerate(states)}
    by_s: dict[Simple, list[int]] = {}
    for i, p in enumerate(states):
        by_s.setdefault(p.s, []).append(i)
    succ: list[list[int]] = [[] for _ in states]
    for s1 in by_s:
        c1 = g.comp[s1]
        for s2, targets in by_s.items():
            if not g.is_left_weighted(s1, s2):
                continue
            for j in targets:
                sm = g.mul(s2, states[j].m)
                if sm == D:
                    continue
                i = index.get((s1, g.meet(c1, sm)))
                if i is not None:
                    succ[i].append(j)
    for row in succ:
        row.sort()
    return TransferMatrix(states, succ, "pseq")


def build_element_matrix(g: GarsideStructure, max_states: int = MAX_STATES) -> TransferMatrix:
    g.require_tables()
    E, D = g.identity, g.delta
    states = [s for s in g.simples if s not in (E, D)]
    if len(states) > max_states:
        raise CapacityError(f"{g.name}: {len(states)} states exceed max-states={max_states}")
    succ = [[j for j, t in enumerate(states) if g.is_left_weighted(s, t)] for s in states]
    return TransferMatrix(states, succ, "element")


def lump(mat: TransferMatrix) -> tuple[list[int], list[list[tuple[int, int]]], list[int]]:
    """Coarsest partition where every state of a block has the same number of
    successors in each block.

    Returns ``(block_of_state, quotient, block_sizes)`` where ``quotient[b]``
    lists ``(target block, multiplicity)``.
    """
    n = mat.dim
    block = [0] * n
    nblocks = 1 if n else 0
    while True:
        sigs: dict[tuple, int] = {}
        new = [0] * n
        for i in range(n):
            counts: dict[int, int] = {}
            for j in mat.succ[i]:
                counts[block[j]] = counts.get(block[j], 0) + 1
            sig = (block[i], tuple(sorted(counts.items())))
            new[i] = sigs.setdefault(sig, len(sigs))
        block = new
        if len(sigs) == nblocks:
            break
        nblocks = len(sigs)
    rep = {}
    for i in range(n):
        rep.setdefault(block[i], i)
    sizes = [0] * nblocks
    for b in block:
        sizes[b] += 1
    quotient = []
    for b in range(nblocks):
        counts: dict[int, int] = {}
        for j in mat.succ[rep[b]]:
            counts[block[j]] = counts.get(block[j], 0) + 1
        quotient.append(sorted(counts.items()))
    return block, quotient, sizes


def count_series(mat: TransferMatrix, k_max: int, max_terms: int = MAX_SERIES_TERMS) -> list[int]:
    """``[1, 1*M^0*1, 1*M^1*1, ...]`` up to index ``k_max``, exactly."""
    if k_max < 0:
        raise UsageError("k_max must be non-negative")
    if k_max + 1 > max_terms:
        raise CapacityError(f"{k_max + 1} series terms exceed max-series-terms={max_terms}")
    _, quotient, sizes = lump(mat)
    return _series(quotient, sizes, k_max)


def _series(quotient, sizes, k_max: int) -> list[int]:
    out = [1]
    u = [1] * len(sizes)  # M^j 1, constant on blocks
    for _ in range(k_max):
        out.append(sum(sz * v for sz, v in zip(sizes, u)))
        u = [sum(mult * u[c] for c, mult in row) for row in quotient]
    return out


def count_series_direct(mat: TransferMatrix, k_max: int) -> list[int]:
    """Unlumped reference implementation of :func:`count_series`."""
    out = [1]
    u = [1] * mat.dim
    for _ in range(k_max):
        out.append(sum(u))
        u = [sum(u[j] for j in row) for row in mat.succ]
    return out


# -- rational generating functions --------------------------------------------

def _trim(p: list) -> list:
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def poly_mul(a: Sequence, b: Sequence) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def poly_gcd(a: Sequence, b: Sequence) -> list[Fraction]:
    """Monic gcd over the rationals (coefficients low to high)."""
    a = _trim([Fraction(x) for x in a])
    b = _trim([Fraction(x) for x in b])
    while any(b):
        while len(a) >= len(b) and any(a):
            f = a[-1] / b[-1]
            shift = len(a) - len(b)
            for i, y in enumerate(b):
                a[i + shift] -= f * y
            a = _trim(a)
            if len(a) == 1 and a[0] == 0:
                break
            if len(a) < len(b):
                break
        a, b = b, a
    return [x / a[-1] for x in a]


def series_of(num: Sequence, den: Sequence, terms: int) -> list:
    """First ``terms`` power series coefficients of ``num/den``; needs ``den[0] != 0``."""
    if den[0] == 0:
        raise UsageError("denominator vanishes at 0")
    if den[0] == 1 and all(isinstance(x, int) for x in list(num) + list(den)):
        ints: list[int] = []
        for k in range(terms):
            v = num[k] if k < len(num) else 0
            for i in range(1, min(k, len(den) - 1) + 1):
                v -= den[i] * ints[k - i]
            ints.append(v)
        return ints
    out = []
    for k in range(terms):
        v = Fraction(num[k]) if k < len(num) else Fraction(0)
        for i in range(1, min(k, len(den) - 1) + 1):
            v -= den[i] * out[k - i]
        out.append(v / den[0])
    return [int(x) if x.denominator == 1 else x for x in out]


@dataclasses.dataclass(frozen=True)
class RationalGF:
    """``num/den`` with integer coefficients listed low to high, ``den[0] == 1``."""

    num: tuple[int, ...]
    den: tuple[int, ...]

    @classmethod
    def normalized(cls, num: Sequence, den: Sequence) -> "RationalGF":
        """Scale so the denominator constant is +1, clear fractions, drop trailing zeros."""
        num = _trim([Fraction(x) for x in num])
        den = _trim([Fraction(x) for x in den])
        if den[0] == 0:
            raise UsageError("denominator constant term is zero")
        c = den[0]
        num = [x / c for x in num]
        den = [x / c for x in den]
        lcm = 1
        for x in num + den:
            lcm = lcm * x.denominator // math.gcd(lcm, x.denominator)
        if lcm != 1:
            raise UsageError("normalized generating function has non-integer coefficients")
        return cls(tuple(int(x) for x in num), tuple(int(x) for x in den))

    @property
    def is_polynomial(self) -> bool:
        return len(self.den) == 1

    def is_reduced(self) -> bool:
        return len(poly_gcd(self.num, self.den)) == 1

    def reduced(self) -> "RationalGF":
        g = poly_gcd(self.num, self.den)
        if len(g) == 1:
            return self
        return RationalGF.normalized(_poly_div(self.num, g), _poly_div(self.den, g))

    def series(self, terms: int) -> list[int]:
        return series_of(self.num, self.den, terms)

    def to_json(self) -> dict:
        return {"num": list(self.num), "den": list(self.den)}

    @classmethod
    def from_json(cls, obj: dict) -> "RationalGF":
        return cls.normalized(obj["num"], obj["den"])

    def __str__(self) -> str:
        return f"({_poly_str(self.num)}) / ({_poly_str(self.den)})"


def _poly_div(a: Sequence, b: Sequence) -> list[Fraction]:
    a = [Fraction(x) for x in a]
    q = [Fraction(0)] * max(1, len(a) - len(b) + 1)
    for i in range(len(a) - len(b), -1, -1):
        f = a[i + len(b) - 1] / b[-1]
        q[i] = f
        for j, y in enumerate(b):
            a[i + j] -= f * y
    if any(a):
        raise ArithmeticError("polynomial division is not exact")
    return q


def _poly_str(p: Sequence[int]) -> str:
    terms = []
    for i in range(len(p) - 1, -1, -1):
        c = p[i]
        if c == 0:
            continue
        mono = "" if i == 0 else ("z" if i == 1 else f"z^{i}")
        coef = str(c) if (abs(c) != 1 or i == 0) else ("-" if c < 0 else "")
        terms.append(f"{coef}{mono}")
    return " + ".join(terms).replace("+ -", "- ") or "0"


def berlekamp_massey(seq: Sequence[int]) -> list[Fraction]:
    """Shortest connection polynomial ``C`` (``C[0] == 1``) of an exact sequence."""
    s = [Fraction(x) for x in seq]
    C, B = [Fraction(1)], [Fraction(1)]
    L, m, b = 0, 1, Fraction(1)
    for n in range(len(s)):
        d = s[n]
        for i in range(1, L + 1):
            d += C[i] * s[n - i]
        if d == 0:
            m += 1
            continue
        coef = d / b
        T = list(C)
        need = len(B) + m
        if len(C) < need:
            C.extend([Fraction(0)] * (need - len(C)))
        for i, y in enumerate(B):
            C[i + m] -= coef * y
        if 2 * L <= n:
            L = n + 1 - L
            B, b, m = T, d, 1
        else:
            m += 1
    return C[: L + 1] + [Fraction(0)] * max(0, L + 1 - len(C))


def _is_probable_prime(n: int) -> bool:
    # deterministic Miller-Rabin for n < 3.3e24
    if n < 2:
        return False
    bases = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for p in bases:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d, r = d // 2, r + 1
    for a in bases:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _primes_below(limit: int):
    n = limit - 1 if limit % 2 == 0 else limit - 2
    while n > 2:
        if _is_probable_prime(n):
            yield n
        n -= 2


def berlekamp_massey_mod(seq: Sequence[int], p: int) -> list[int]:
    """Shortest connection polynomial of ``seq`` over GF(p)."""
    s = [x % p for x in seq]
    C, B = [1], [1]
    L, m, b = 0, 1, 1
    for n in range(len(s)):
        d = s[n]
        for i in range(1, L + 1):
            d += C[i] * s[n - i]
        d %= p
        if d == 0:
            m += 1
            continue
        coef = d * pow(b, -1, p) % p
        T = list(C)
        if len(C) < len(B) + m:
            C.extend([0] * (len(B) + m - len(C)))
        for i, y in enumerate(B):
            C[i + m] = (C[i + m] - coef * y) % p
        if 2 * L <= n:
            L = n + 1 - L
            B, b, m = T, d, 1
        else:
            m += 1
    C = C[: L + 1]
    return C + [0] * (L + 1 - len(C))


def _symmetric(x: int, mod: int) -> int:
    x %= mod
    return x - mod if 2 * x > mod else x


def _coprime_mod(a: Sequence[int], b: Sequence[int], p: int) -> bool:
    a = _trim([x % p for x in a])
    b = _trim([x % p for x in b])
    while any(b):
        while len(a) >= len(b) and any(a):
            f = a[-1] * pow(b[-1], -1, p) % p
            shift = len(a) - len(b)
            for i, y in enumerate(b):
                a[i + shift] = (a[i + shift] - f * y) % p
            a = _trim(a)
            if len(a) < len(b) or not any(a):
                break
        a, b = b, a
    return len(a) == 1


def _integer_recurrence(seq: list[int]) -> list[int] | None:
    """Minimal integer connection polynomial (``C[0] == 1``) by Berlekamp-Massey
    modulo several primes and Chinese remaindering; checked exactly on ``seq``.

    An integer sequence with a rational generating function has one whose
    denominator is an integer polynomial with constant term 1, so the
    reconstruction terminates once enough primes are used.
    """
    mod, acc, L, prev = 1, None, -1, None
    for p in _primes_below(1 << 62):
        C = berlekamp_massey_mod(seq, p)
        if len(C) - 1 < L:
            continue  # p divides a leading quantity; skip it
        if len(C) - 1 > L:
            L, mod, acc, prev = len(C) - 1, 1, [0] * len(C), None
        acc = [a + mod * ((c - a) * pow(mod, -1, p) % p) for a, c in zip(acc, C)]
        mod *= p
        cand = [_symmetric(a, mod) for a in acc]
        if cand == prev:
            ok = all(sum(cand[i] * seq[n - i] for i in range(L + 1)) == 0
                     for n in range(L, len(seq)))
            if ok:
                return cand
        prev = cand
        if mod.bit_length() > 64 * (len(seq) + 8) * max(1, max(x.bit_length() for x in seq)):
            return None
    return None


def generating_function(series_prefix: Sequence[int], dim: int | None = None) -> RationalGF:
    """Rational generating function of an integer sequence from a finite prefix.

    With ``dim`` given (an upper bound on the recurrence order), the prefix
    must hold at least ``2*dim + 2`` terms and the result is certain; the
    remaining terms re-check it.
    """
    seq = list(series_prefix)
    if dim is not None and len(seq) < 2 * dim + 2:
        raise NeedsMoreTermsError(f"need {2 * dim + 2} terms for dimension {dim}, got {len(seq)}")
    if not any(seq):
        return RationalGF((0,), (1,))
    C = _integer_recurrence(seq) if all(isinstance(x, int) for x in seq) else None
    exact_ints = C is not None
    if C is None:
        C = berlekamp_massey(seq)
    L = len(C) - 1
    if 2 * L >= len(seq):
        raise NeedsMoreTermsError(f"recurrence of order {L} not confirmed by {len(seq)} terms")
    P = poly_mul(seq[: L + 1], C)[:L]
    gf = RationalGF.normalized(P or [0], C)
    if not (exact_ints and _coprime_mod(gf.num, gf.den, next(_primes_below(1 << 61)))):
        gf = gf.reduced()
    if gf.series(len(seq)) != seq:
        raise NeedsMoreTermsError("generating function does not reproduce the prefix")
    return gf


# -- growth rates -------------------------------------------------------------

def _eval(p: Sequence, x: Fraction) -> Fraction:
    v = Fraction(0)
    for c in reversed(p):
        v = v * x + c
    return v


def growth_rate(gf: RationalGF) -> tuple[float, bool]:
    """Reciprocal of the smallest pole modulus, and whether that pole is unique."""
    if not gf.is_reduced():
        raise UsageError("generating function is not in lowest terms")
    if gf.is_polynomial:
        return 0.0, False
    roots = np.roots([float(c) for c in reversed(gf.den)])
    mods = np.abs(roots)
    rmin = float(mods.min())
    unique = int(np.sum(np.abs(mods - rmin) <= POLE_TOLERANCE * rmin)) == 1
    rho = _refine_positive_root(gf.den, rmin)
    return 1.0 / rho, unique


def _refine_positive_root(den: Sequence[int], guess: float) -> float:
    # coefficients are non-negative, so a pole of minimal modulus sits on the
    # positive real axis; bisect the exact polynomial around the float guess
    exact = Fraction(guess).limit_denominator(10 ** 6)
    if _eval(den, exact) == 0:
        return float(exact)
    width = 1e-9
    while width < 1:
        lo, hi = Fraction(guess * (1 - width)), Fraction(guess * (1 + width))
        flo, fhi = _eval(den, lo), _eval(den, hi)
        if flo == 0 or fhi == 0:
            return float(lo if flo == 0 else hi)
        if (flo > 0) != (fhi > 0):
            for _ in range(64):
                mid = (lo + hi) / 2
                fm = _eval(den, mid)
                if fm == 0:
                    return float(mid)
                if (fm > 0) == (flo > 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            return float((lo + hi) / 2)
        width *= 10
    return guess


def series_rate_estimates(series: Sequence[int]) -> dict:
    """Root test ``c_k^(1/k)`` and ratio ``c_k / c_(k-1)`` at the last index."""
    k = len(series) - 1
    ck, prev = series[-1], series[-2] if k >= 1 else 0
    if ck <= 0:
        return {"k": k, "root": 0.0, "ratio": 0.0}
    return {"k": k, "root": math.exp(math.log(ck) / k),
            "ratio": ck / prev if prev > 0 else float("inf")}


def max_pseq_length(mat: TransferMatrix) -> int | float:
    """Length of the longest walk, or ``math.inf`` if the graph has a cycle."""
    if mat.dim == 0:
        return 0
    ts = graphlib.TopologicalSorter({i: row for i, row in enumerate(mat.succ)})
    try:
        order = list(ts.static_order())
    except graphlib.CycleError:
        return math.inf
    # static_order lists successors before their predecessors
    longest = [1] * mat.dim
    for i in order:
        if mat.succ[i]:
            longest[i] = 1 + max(longest[j] for j in mat.succ[i])
    return max(longest)


# -- reports ------------------------------------------------------------------

@dataclasses.dataclass
class SeriesAnalysis:
    gf: RationalGF
    rate: float
    unique_minimal_pole: bool
    dim: int
    lumped_dim: int
    terms_used: int
    check: dict

    def to_json(self) -> dict:
        return {**self.gf.to_json(), "rate": self.rate, "unique_minimal_pole": self.unique_minimal_pole,
                "dim": self.dim, "lumped_dim": self.lumped_dim, "terms": self.terms_used,
                "series_check": self.check}


def analyse(mat: TransferMatrix, max_terms: int = MAX_SERIES_TERMS,
            check_terms: int = CAUCHY_HADAMARD_TERMS) -> SeriesAnalysis:
    """Generating function and growth rate of ``1 * M^(k-1) * 1``."""
    _, quotient, sizes = lump(mat)
    q = len(sizes)
    # order of the full sequence (with the leading 1) is at most q + 1
    need = 2 * (q + 1) + 2 + q
    terms = max(need, check_terms + 1)
    if terms > max_terms:
        raise CapacityError(f"{mat.kind} series needs {terms} terms, above max-series-terms={max_terms}")
    series = _series(quotient, sizes, terms - 1)
    gf = generating_function(series[: 2 * (q + 1) + 2], q + 1)
    if gf.series(len(series)) != series:
        raise NeedsMoreTermsError("generating function fails the extra terms")
    rate, unique = growth_rate(gf)
    est = series_rate_estimates(series[: check_terms + 1])
    check = {**est, "agrees": rate <= 1.0 or abs(est["ratio"] - rate) <= 1e-3 * rate}
    return SeriesAnalysis(gf, rate, unique, mat.dim, q, len(series), check)


VERDICTS = ("pd_bounded", "expected_pd_bounded", "inconclusive")


@dataclasses.dataclass
class GrowthReport:
    structure: str
    pseq: SeriesAnalysis
    element: SeriesAnalysis
    pseq_max_length: int | float

    @property
    def alpha(self) -> float:
        return self.pseq.rate

    @property
    def beta(self) -> float:
        return self.element.rate

    @property
    def unique_minimal_pole(self) -> bool:
        return self.element.unique_minimal_pole

    @property
    def verdict(self) -> str:
        if self.pseq_max_length != math.inf:
            return "pd_bounded"
        if self.alpha < self.beta and self.unique_minimal_pole:
            return "expected_pd_bounded"
        return "inconclusive"

    def to_json(self) -> dict:
        return {
            "structure": self.structure,
            "pseq_gf": self.pseq.gf.to_json(),
            "element_gf": self.element.gf.to_json(),
            "alpha": self.alpha,
            "beta": self.beta,
            "pseq_max_length": "inf" if self.pseq_max_length == math.inf else self.pseq_max_length,
            "unique_minimal_pole": self.unique_minimal_pole,
            "verdict": self.verdict,
            "diagnostics": {"pseq": self.pseq.to_json(), "element": self.element.to_json()},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def check_criterion(g: GarsideStructure, max_states: int = MAX_STATES,
                    max_terms: int = MAX_SERIES_TERMS) -> GrowthReport:
    pm = build_pseq_matrix(g, max_states)
    em = build_element_matrix(g, max_states)
    return GrowthReport(g.name, analyse(pm, max_terms), analyse(em, max_terms), max_pseq_length(pm))


# -- oracles ------------------------------------------------------------------

def enumerate_pseq(g: GarsideStructure, k: int) -> list[tuple[tuple[Simple, Simple], ...]]:
    """Penetration sequences of length ``k`` straight from their definition.

    Candidate letters range over all of ``D(Delta) x D(Delta)``; the last
    letter must satisfy ``s*m <= Delta`` (it is ``comp(s) ^ x`` for some x).
    """
    g.require_tables()
    if k == 0:
        return [()]
    E, D = g.identity, g.delta
    nontriv = [s for s in g.simples if s not in (E, D)]
    out = []

    def rec(seq):
        if len(seq) == k:
            s, m = seq[-1]
            if g.mul(s, m) >= 0:
                out.append(tuple(seq))
            return
        i = len(seq) + 1
        for s2 in nontriv:
            if seq and g.meet(g.comp[seq[-1][0]], s2) != E:
                continue
            for m2 in nontriv:
                sm = g.mul(s2, m2)
                if i > 1 and sm == D:
                    continue
                if seq:
                    s1, m1 = seq[-1]
                    # s2*m2 is simple whenever the next condition can hold
                    if sm < 0 or m1 != g.meet(g.comp[s1], sm):
                        continue
                seq.append((s2, m2))
                rec(seq)
                seq.pop()

    rec([])
    return out


def scatter_csv(reports: Sequence[GrowthReport]) -> str:
    lines = ["structure,alpha,beta"]
    for r in reports:
        lines.append(f"{r.structure},{r.alpha:.6g},{r.beta:.6g}")
    return "\n".join(lines) + "\n"
