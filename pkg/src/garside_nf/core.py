"""
Finite Garside structures and the generic lattice operations on their simples.

A simple element is a dense integer id into its structure's tables.  Concrete
structures (see :mod:`garside_nf.structures`) only have to supply products and
left quotients of simples together with the per-simple length and atom
divisibility masks; everything else (meet, complement, tau, left-weighting) is
derived here.

Atom sets are stored as bit masks: bit ``i`` stands for ``structure.atoms[i]``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from typing import Iterable, Sequence

from .errors import CapacityError, UsageError

Simple = int


class GarsideStructure:
    """Base class for a Garside monoid of spherical type given by its simples.

    Subclasses fill the per-simple lists (``length``, ``start_mask``,
    ``finish_mask``, ``comp``, ``labels``) and implement :meth:`mul` and
    :meth:`ldiv`.  ``complete`` is True when every simple has been enumerated
    ("table mode").
    """

    name: str
    n: int | None
    identity: Simple
    delta: Simple
    atoms: tuple[Simple, ...]
    central_power: int
    complete: bool

    def __init__(self, name: str, n: int | None = None):
        self.name = name
        self.n = n
        self.labels: list = []
        self.length: list[int] = []
        self.start_mask: list[int] = []
        self.finish_mask: list[int] = []
        self.comp: list[int] = []
        self._meet_cache: dict[tuple[int, int], int] = {}
        self._pair_cache: dict[tuple[int, int], tuple[int, int]] = {}
        self._tau_cache: dict[tuple[int, int], int] = {}
        self.complete = False

    # -- primitives supplied by subclasses ------------------------------------

    def mul(self, s: Simple, t: Simple) -> Simple:
        """Return the id of ``s*t`` if the product is simple, else -1."""
        raise NotImplementedError

    def ldiv(self, m: Simple, y: Simple) -> Simple:
        """Return ``z`` with ``m*z == y`` if ``m`` left-divides ``y``, else -1."""
        raise NotImplementedError

    def label(self, s: Simple):
        """JSON-serialisable representation of a simple."""
        return self.labels[s]

    def simple_from_label(self, label) -> Simple:
        raise NotImplementedError

    # -- enumeration ----------------------------------------------------------

    @property
    def size(self) -> int:
        self.require_tables()
        return len(self.length)

    @property
    def simples(self) -> range:
        self.require_tables()
        return range(len(self.length))

    def proper_simples(self) -> list[Simple]:
        """Simples other than the identity and Delta."""
        return [s for s in self.simples if s != self.identity and s != self.delta]

    def require_tables(self) -> None:
        if not self.complete:
            raise CapacityError(
                f"{self.name}: operation needs the full table of simples, "
                "which was not built for this structure"
            )

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def all_atoms_mask(self) -> int:
        return (1 << len(self.atoms)) - 1

    def atom_index(self, a: Simple) -> int:
        return self.atoms.index(a)

    def atoms_of_mask(self, mask: int) -> frozenset[Simple]:
        return frozenset(a for i, a in enumerate(self.atoms) if mask >> i & 1)

    # -- derived lattice operations -------------------------------------------

    def meet(self, s: Simple, t: Simple) -> Simple:
        """Greatest common left divisor, by greedy atom extension."""
        key = (s, t)
        cached = self._meet_cache.get(key)
        if cached is not None:
            return cached
        start, atoms = self.start_mask, self.atoms
        d, rs, rt = self.identity, s, t
        while True:
            common = start[rs] & start[rt]
            if not common:
                break
            a = atoms[(common & -common).bit_length() - 1]
            d = self.mul(d, a)
            rs = self.ldiv(a, rs)
            rt = self.ldiv(a, rt)
        self._meet_cache[key] = d
        self._meet_cache[(t, s)] = d
        return d

    def complement(self, s: Simple) -> Simple:
        """The right complement: ``s * complement(s) == Delta``."""
        return self.comp[s]

    def tau(self, s: Simple, power: int = 1) -> Simple:
        """Conjugation ``Delta^-power s Delta^power``; ``tau(s, 1)`` is ``comp(comp(s))``."""
        p = power % self.central_power
        if p == 0:
            return s
        key = (s, p)
        r = self._tau_cache.get(key)
        if r is None:
            r = s
            comp = self.comp
            for _ in range(p):
                r = comp[comp[r]]
            self._tau_cache[key] = r
        return r

    def left_weighted_pair(self, x: Simple, y: Simple) -> tuple[Simple, Simple]:
        """Rewrite ``(x, y)`` to ``(x m, m^-1 y)`` with ``m = comp(x) ^ y``."""
        key = (x, y)
        r = self._pair_cache.get(key)
        if r is None:
            m = self.meet(self.comp[x], y)
            r = (self.mul(x, m), self.ldiv(m, y))
            self._pair_cache[key] = r
        return r

    def is_left_weighted(self, x: Simple, y: Simple) -> bool:
        return self.meet(self.comp[x], y) == self.identity

    def left_divides(self, s: Simple, t: Simple) -> bool:
        return self.ldiv(s, t) != -1

    def starting_set(self, s: Simple) -> frozenset[Simple]:
        return self.atoms_of_mask(self.start_mask[s])

    def finishing_set(self, s: Simple) -> frozenset[Simple]:
        return self.atoms_of_mask(self.finish_mask[s])

    def simple_length(self, s: Simple) -> int:
        return self.length[s]

    @property
    def delta_length(self) -> int:
        return self.length[self.delta]

    def atom_weight(self, a: Simple) -> int:
        return self.length[a]

    def word_to_simple(self, letters: Iterable[Simple]) -> Simple:
        """Product of atoms, or -1 as soon as it stops being simple."""
        s = self.identity
        for a in letters:
            s = self.mul(s, a)
            if s < 0:
                return -1
        return s

    def fingerprint(self) -> str:
        """Hash of the simple, complement and length tables."""
        self.require_tables()
        h = hashlib.sha256()
        payload = {
            "name": self.name,
            "labels": [self.label(s) for s in self.simples],
            "comp": self.comp,
            "length": self.length,
            "atoms": list(self.atoms),
        }
        h.update(json.dumps(payload, sort_keys=True).encode())
        return h.hexdigest()[:16]

    def describe(self) -> dict:
        return {"structure": self.name, "n": self.n}

    def __repr__(self) -> str:
        return f"<GarsideStructure {self.name}>"


def check_same_structure(*items) -> GarsideStructure:
    g = None
    for it in items:
        h = it if isinstance(it, GarsideStructure) else it.structure
        if g is None:
            g = h
        elif h is not g:
            raise UsageError(f"mixed structures: {g.name} and {h.name}")
    return g


@dataclasses.dataclass(frozen=True)
class CanonicalForm:
    """``Delta^inf x_1 ... x_cl`` with proper simple, left-weighted factors."""

    structure: GarsideStructure = dataclasses.field(repr=False, compare=False)
    inf: int
    factors: tuple[Simple, ...]

    def __eq__(self, other):
        if not isinstance(other, CanonicalForm):
            return NotImplemented
        return (self.structure is other.structure and self.inf == other.inf
                and self.factors == other.factors)

    def __hash__(self):
        return hash((id(self.structure), self.inf, self.factors))

    @classmethod
    def trivial(cls, g: GarsideStructure) -> "CanonicalForm":
        return cls(g, 0, ())

    @classmethod
    def of_simple(cls, g: GarsideStructure, s: Simple) -> "CanonicalForm":
        if s == g.identity:
            return cls(g, 0, ())
        if s == g.delta:
            return cls(g, 1, ())
        return cls(g, 0, (s,))

    @property
    def cl(self) -> int:
        return len(self.factors)

    @property
    def sup(self) -> int:
        return self.inf + len(self.factors)

    @property
    def is_trivial(self) -> bool:
        return self.inf == 0 and not self.factors

    def weighted_length(self) -> int:
        g = self.structure
        return self.inf * g.delta_length + sum(g.length[f] for f in self.factors)

    def lam(self, i: int) -> Simple:
        """i-th factor from the left (1-based), identity out of range."""
        if 1 <= i <= len(self.factors):
            return self.factors[i - 1]
        return self.structure.identity

    def rho(self, i: int) -> Simple:
        """i-th factor from the right (1-based), identity out of range."""
        l = len(self.factors)
        if 1 <= i <= l:
            return self.factors[l - i]
        return self.structure.identity

    def is_valid(self) -> bool:
        g = self.structure
        if any(f in (g.identity, g.delta) for f in self.factors):
            return False
        return all(g.is_left_weighted(a, b) for a, b in zip(self.factors, self.factors[1:]))

    def to_json(self) -> dict:
        g = self.structure
        return {"inf": self.inf, "factors": [g.label(f) for f in self.factors]}

    @classmethod
    def from_json(cls, g: GarsideStructure, obj: dict) -> "CanonicalForm":
        return cls(g, int(obj["inf"]), tuple(g.simple_from_label(f) for f in obj["factors"]))

    def __str__(self) -> str:
        g = self.structure
        parts = [f"D^{self.inf}"] if self.inf else []
        parts += [str(g.label(f)) for f in self.factors]
        return " ".join(parts) or "1"


def canonical_starting_set(x: CanonicalForm) -> frozenset[Simple]:
    g = x.structure
    if x.inf > 0:
        return frozenset(g.atoms)
    if not x.factors:
        return frozenset()
    return g.starting_set(x.factors[0])


def left_weighted(g: GarsideStructure, seq: Sequence[Simple]) -> bool:
    return all(g.is_left_weighted(a, b) for a, b in zip(seq, seq[1:]))
