"""
Left normal forms of atom words and the penetration distance of a product.

``normal_form_linear`` runs the Delta-annotated algorithm with linear expected
time: each factor carries a power of Delta modulo the central power, the
backward propagation stops as soon as a Delta appears, and a final backward
sweep pushes the annotations to the front.  ``normal_form_baseline`` re-sweeps
the whole factor list for every letter and serves as the reference.
"""
from __future__ import annotations

import dataclasses
from typing import Sequence

from .core import CanonicalForm, GarsideStructure, Simple
from .errors import UsageError


@dataclasses.dataclass(frozen=True)
class AtomWord:
    structure: GarsideStructure = dataclasses.field(repr=False, compare=False)
    letters: tuple[Simple, ...]

    def __post_init__(self):
        atoms = set(self.structure.atoms)
        bad = [a for a in self.letters if a not in atoms]
        if bad:
            raise UsageError(f"letters {bad[:5]} are not atoms of {self.structure.name}")

    @property
    def weight(self) -> int:
        length = self.structure.length
        return sum(length[a] for a in self.letters)

    def __len__(self):
        return len(self.letters)


def word_from_indices(g: GarsideStructure, indices: Sequence[int]) -> AtomWord:
    """Word from 0-based atom indices (``0`` is the first atom)."""
    return AtomWord(g, tuple(g.atoms[i] for i in indices))


@dataclasses.dataclass(frozen=True)
class PenetrationRecord:
    """Penetration sequence ``(s_1, m_1) ... (s_k, m_k)`` listed left to right."""

    pd: int
    trail: tuple[tuple[Simple, Simple], ...]


def _strip(g: GarsideStructure, inf: int, factors: list[Simple]) -> CanonicalForm:
    D, E = g.delta, g.identity
    lead = 0
    while lead < len(factors) and factors[lead] == D:
        lead += 1
    end = len(factors)
    while end > lead and factors[end - 1] == E:
        end -= 1
    return CanonicalForm(g, inf + lead, tuple(factors[lead:end]))


def normal_form_baseline(w: AtomWord) -> CanonicalForm:
    """Append letters one at a time, re-left-weighting every adjacent pair."""
    g = w.structure
    pair = g.left_weighted_pair
    inf = 0
    f: list[Simple] = []
    for a in w.letters:
        f.append(a)
        for j in range(len(f) - 1, 0, -1):
            f[j - 1], f[j] = pair(f[j - 1], f[j])
        x = _strip(g, inf, f)
        inf, f = x.inf, list(x.factors)
    return CanonicalForm(g, inf, tuple(f))


def normal_form_linear(w: AtomWord, debug: bool = False) -> CanonicalForm:
    """Normal form of an atom word in linear expected time.

    The processed prefix is kept as a stack of factors ``x`` with Delta
    exponents ``l`` (mod the central power ``c``) so that the prefix equals
    ``Delta^(I - sum l) Delta^l_1 x_1 ... Delta^l_k x_k Delta^pending``.
    With ``debug=True`` that identity is re-checked after every letter.
    """
    g = w.structure
    c = g.central_power
    D, E = g.delta, g.identity
    pair, tau = g.left_weighted_pair, g.tau
    x: list[Simple] = []
    l: list[int] = []
    I = 0
    pending = 0
    for step, y in enumerate(w.letters):
        if y == D:
            pending = (pending + 1) % c
            I += 1
        elif not x:
            x.append(y)
            l.append(pending)
            pending = 0
        else:
            ly, pending = pending, 0
            if ly:
                x[-1] = tau(x[-1], ly)
                l[-1] = (l[-1] + ly) % c
                ly = 0
            j = len(x) - 1
            a, b = pair(x[j], y)
            if a == x[j]:
                x.append(y)
                l.append(0)
            else:
                x[j], y = a, b
                if j > 0 and l[j]:
                    x[j - 1] = tau(x[j - 1], l[j])
                    l[j - 1] = (l[j - 1] + l[j]) % c
                    l[j] = 0
                while x[j] != D and j > 0:
                    a, b = pair(x[j - 1], x[j])
                    if a == x[j - 1]:
                        break
                    x[j - 1], x[j] = a, b
                    j -= 1
                    if j > 0 and l[j]:
                        x[j - 1] = tau(x[j - 1], l[j])
                        l[j - 1] = (l[j - 1] + l[j]) % c
                        l[j] = 0
                if x[j] == D:
                    I += 1
                    if j + 1 < len(x):
                        l[j + 1] = (l[j] + l[j + 1] + 1) % c
                    else:
                        ly = (l[j] + ly + 1) % c
                    del x[j]
                    del l[j]
                if y == E:
                    pending = ly
                else:
                    x.append(y)
                    l.append(ly)
        if debug:
            _check_invariant(g, w.letters[: step + 1], x, l, I, pending)
    if x:
        if pending:
            x[-1] = tau(x[-1], pending)
            l[-1] = (l[-1] + pending) % c
        for j in range(len(x) - 1, 0, -1):
            if l[j]:
                x[j - 1] = tau(x[j - 1], l[j])
                l[j - 1] = (l[j - 1] + l[j]) % c
                l[j] = 0
    return CanonicalForm(g, I, tuple(x))


def _check_invariant(g, prefix, x, l, I, pending) -> None:
    expected = normal_form_baseline(AtomWord(g, tuple(prefix)))
    got = CanonicalForm(g, I - sum(l) - pending, ())
    for lj, xj in zip(l, x):
        for _ in range(lj):
            got = multiply_simple(got, g.delta)
        got = multiply_simple(got, xj)
    for _ in range(pending):
        got = multiply_simple(got, g.delta)
    if got != expected:
        raise AssertionError(f"loop invariant broken after {len(prefix)} letters: {got} != {expected}")


def multiply_simple(x: CanonicalForm, s: Simple) -> CanonicalForm:
    """Canonical form of ``x * s`` by right-to-left rewriting with early exit."""
    g = x.structure
    E, D = g.identity, g.delta
    if s == E:
        return x
    if s == D:
        return CanonicalForm(g, x.inf + 1, tuple(g.tau(f, 1) for f in x.factors))
    f = list(x.factors)
    f.append(s)
    pair = g.left_weighted_pair
    for j in range(len(f) - 2, -1, -1):
        a, b = pair(f[j], f[j + 1])
        if a == f[j]:
            break
        f[j], f[j + 1] = a, b
        if a == D:
            head = [g.tau(t, 1) for t in f[:j]]
            rest = f[j + 1:]
            if rest and rest[-1] == E:
                rest.pop()
            return CanonicalForm(g, x.inf + 1, tuple(head + rest))
    if f[-1] == E:
        f.pop()
    return CanonicalForm(g, x.inf, tuple(f))


def multiply_word(x: CanonicalForm, letters: Sequence[Simple]) -> CanonicalForm:
    for a in letters:
        x = multiply_simple(x, a)
    return x


def penetration_distance(x: CanonicalForm, y) -> int:
    """Number of trailing factors of ``x`` changed non-trivially in ``x*y``.

    ``y`` is a simple or an :class:`AtomWord`.  Computed from the definition:
    compare the Delta-free factor sequences of ``x`` and ``x*y`` (both untwisted
    by their infimum) and count what lies beyond their common prefix.
    """
    g = x.structure
    if isinstance(y, AtomWord):
        if y.structure is not g:
            raise UsageError("mixed structures")
        xy = multiply_word(x, y.letters)
    else:
        xy = multiply_simple(x, y)
    a = [g.tau(f, -x.inf) for f in x.factors]
    b = [g.tau(f, -xy.inf) for f in xy.factors]
    best = 0
    for i in range(1, len(a) + 1):
        # x ^ Delta^i is the product of the first i factors (or all of them)
        if a[:i] == b[:i]:
            best = i
        else:
            break
    return len(a) - best


def pd_tracked(x: CanonicalForm, s: Simple) -> tuple[CanonicalForm, PenetrationRecord]:
    """Multiply by a simple, recording the penetration sequence of the change."""
    g = x.structure
    if s == g.identity:
        raise UsageError("pd_tracked needs a non-trivial multiplier")
    product = multiply_simple(x, s)
    if s == g.delta:
        return product, PenetrationRecord(0, ())
    trail = _trail(g, x.factors, s)
    return product, PenetrationRecord(len(trail), tuple(reversed(trail)))


def _trail(g: GarsideStructure, factors: Sequence[Simple], s: Simple) -> list[tuple[Simple, Simple]]:
    comp, meet, mul, E, D = g.comp, g.meet, g.mul, g.identity, g.delta
    trail = []
    carry = s
    for j in range(len(factors) - 1, -1, -1):
        sj = factors[j]
        m = meet(comp[sj], carry)
        if m == E:
            break
        trail.append((sj, m))
        carry = mul(sj, m)
        if carry == D:
            break
    return trail


def pd_fast(g: GarsideStructure, factors: Sequence[Simple], s: Simple) -> int:
    """Penetration distance of ``x*s`` for a non-Delta simple, in O(pd) steps."""
    comp, meet, mul, E, D = g.comp, g.meet, g.mul, g.identity, g.delta
    if s == D:
        return 0
    carry = s
    k = 0
    for j in range(len(factors) - 1, -1, -1):
        sj = factors[j]
        m = meet(comp[sj], carry)
        if m == E:
            break
        k += 1
        carry = mul(sj, m)
        if carry == D:
            break
    return k


def is_penetration_sequence(g: GarsideStructure, trail: Sequence[tuple[Simple, Simple]]) -> bool:
    """Check the four defining conditions on consecutive pairs."""
    E, D = g.identity, g.delta
    for i, (s, m) in enumerate(trail):
        if s in (E, D) or m in (E, D):
            return False
        if i > 0 and g.mul(s, m) == D:
            return False
        if i + 1 < len(trail):
            s2, m2 = trail[i + 1]
            if not g.is_left_weighted(s, s2):
                return False
            sm2 = g.mul(s2, m2)
            if sm2 < 0 or m != g.meet(g.comp[s], sm2):
                return False
    return True
