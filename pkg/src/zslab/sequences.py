"""Finite sequences (multisets) of elements of F_p^d.

Order never matters for any computation in this package, so a sequence is
stored as a sorted run-length encoding: ``entries`` is a tuple of
``(coords, multiplicity)`` pairs sorted by canonical element index, with
positive multiplicities and no repeated coords.  That makes equality,
hashing and canonical iteration free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import DomainError, InputError
from .groups import GroupSpec, LinearMap, Vector


@dataclass(frozen=True)
class ElementSequence:
    spec: GroupSpec
    entries: tuple[tuple[Vector, int], ...]

    # -- constructors ------------------------------------------------------

    @classmethod
    def empty(cls, spec: GroupSpec) -> "ElementSequence":
        return cls(spec, ())

    @classmethod
    def from_elements(cls, spec: GroupSpec, elems: Iterable[Sequence[int]]) -> "ElementSequence":
        counts: dict[int, int] = {}
        for e in elems:
            idx = spec.encode(e)
            counts[idx] = counts.get(idx, 0) + 1
        return cls._from_index_counts(spec, counts)

    @classmethod
    def from_pairs(
        cls, spec: GroupSpec, pairs: Iterable[tuple[Sequence[int], int]]
    ) -> "ElementSequence":
        counts: dict[int, int] = {}
        for coords, mult in pairs:
            if mult < 0:
                raise InputError(f"negative multiplicity {mult}")
            if mult:
                idx = spec.encode(coords)
                counts[idx] = counts.get(idx, 0) + mult
        return cls._from_index_counts(spec, counts)

    @classmethod
    def from_indices(cls, spec: GroupSpec, indices: Iterable[int]) -> "ElementSequence":
        counts: dict[int, int] = {}
        for idx in indices:
            if not 0 <= idx < spec.order:
                raise InputError(f"index {idx} out of range [0, {spec.order})")
            counts[idx] = counts.get(idx, 0) + 1
        return cls._from_index_counts(spec, counts)

    @classmethod
    def _from_index_counts(cls, spec: GroupSpec, counts: Mapping[int, int]) -> "ElementSequence":
        entries = tuple((spec.decode(i), counts[i]) for i in sorted(counts) if counts[i])
        return cls(spec, entries)

    # -- views -------------------------------------------------------------

    @property
    def length(self) -> int:
        """Total number of terms, counted with multiplicity."""
        return sum(m for _, m in self.entries)

    @property
    def distinct_count(self) -> int:
        return len(self.entries)

    def multiplicity(self, coords: Sequence[int]) -> int:
        target = self.spec.reduce(coords)
        for v, m in self.entries:
            if v == target:
                return m
        return 0

    def support(self) -> tuple[Vector, ...]:
        return tuple(v for v, _ in self.entries)

    def occurrences(self) -> Iterator[Vector]:
        """Each term repeated by multiplicity, in canonical order."""
        for v, m in self.entries:
            for _ in range(m):
                yield v

    def counts_by_index(self) -> dict[int, int]:
        return {self.spec.encode(v): m for v, m in self.entries}

    def total_sum(self) -> Vector:
        acc = self.spec.zero()
        for v, m in self.entries:
            acc = self.spec.add(acc, self.spec.scale(m, v))
        return acc

    def __len__(self) -> int:
        return self.length

    def __bool__(self) -> bool:
        return bool(self.entries)

    def __contains__(self, coords: Sequence[int]) -> bool:
        return self.multiplicity(coords) > 0

    # -- multiset algebra ----------------------------------------------------

    def __add__(self, other: "ElementSequence") -> "ElementSequence":
        if other.spec != self.spec:
            raise InputError("cannot combine sequences over different groups")
        counts = self.counts_by_index()
        for idx, m in other.counts_by_index().items():
            counts[idx] = counts.get(idx, 0) + m
        return ElementSequence._from_index_counts(self.spec, counts)

    def subtract(self, other: "ElementSequence") -> "ElementSequence":
        """Multiset difference; other must be a sub-multiset of self."""
        if other.spec != self.spec:
            raise InputError("cannot combine sequences over different groups")
        counts = self.counts_by_index()
        for idx, m in other.counts_by_index().items():
            have = counts.get(idx, 0)
            if m > have:
                raise InputError(
                    f"cannot remove {m} copies of index {idx}; only {have} present"
                )
            counts[idx] = have - m
        return ElementSequence._from_index_counts(self.spec, counts)

    def restrict(self, predicate) -> "ElementSequence":
        """Terms (with multiplicity) whose coords satisfy the predicate."""
        return ElementSequence(
            self.spec, tuple((v, m) for v, m in self.entries if predicate(v))
        )

    def take(self, pairs: Iterable[tuple[Vector, int]]) -> "ElementSequence":
        """Sub-multiset given by explicit (coords, multiplicity) picks."""
        picked = ElementSequence.from_pairs(self.spec, pairs)
        for v, m in picked.entries:
            if m > self.multiplicity(v):
                raise InputError(f"take exceeds multiplicity at {v}")
        return picked

    # -- geometric actions -----------------------------------------------------

    def translate(self, t: Sequence[int]) -> "ElementSequence":
        t = self.spec.reduce(t)
        return ElementSequence._from_index_counts(
            self.spec,
            {self.spec.encode(self.spec.add(v, t)): m for v, m in self.entries},
        )

    def dilate(self, b: int) -> "ElementSequence":
        """Pointwise multiplication by a nonzero scalar; d = 1 only."""
        if self.spec.d != 1:
            raise DomainError("dilation by a scalar is defined for d = 1 only")
        if b % self.spec.p == 0:
            raise InputError("dilation factor must be nonzero mod p")
        return ElementSequence._from_index_counts(
            self.spec,
            {self.spec.encode(self.spec.scale(b, v)): m for v, m in self.entries},
        )

    def apply_map(self, phi: LinearMap) -> "ElementSequence":
        if phi.spec != self.spec:
            raise InputError("map belongs to a different group")
        if not phi.invertible:
            raise DomainError("only invertible maps preserve sequence structure")
        return ElementSequence._from_index_counts(
            self.spec, {self.spec.encode(phi.apply(v)): m for v, m in self.entries}
        )


def dilate(b: int, seq: ElementSequence) -> ElementSequence:
    return seq.dilate(b)


def apply_map(phi: LinearMap, seq: ElementSequence) -> ElementSequence:
    return seq.apply_map(phi)
