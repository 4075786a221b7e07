"""Dense subset and subsequence-sum computations over F_p^d.

A subset of the group is one big Python integer with bit ``i`` set when the
element of canonical index ``i`` is present.  Translation by a group element
is then d cyclic bit rotations (one per axis), each two shifts and three
masks, so the whole engine rides on CPython's bignum kernels instead of
per-element loops.

The subsequence-sum routines fold one sequence term at a time:

    reach' = reach | (reach + a) | {a}

for the set of all nonempty subsequence sums, and a layered version of the
same recurrence when sums must use an exact number of terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .errors import DomainError, InputError, InternalConsistencyError, PreconditionError
from .groups import AffineFlat, GroupSpec, Vector, hyperplane_normals, kernel_of_normal
from .sequences import ElementSequence


def _repeat(block: int, period: int, count: int) -> int:
    """Tile ``block`` at bit offsets 0, period, ..., (count-1)*period."""
    result = 0
    filled = 0
    piece = block
    piece_count = 1
    while count:
        if count & 1:
            result |= piece << (filled * period)
            filled += piece_count
        count >>= 1
        if count:
            piece |= piece << (piece_count * period)
            piece_count *= 2
    return result


@lru_cache(maxsize=4096)
def _axis_low_mask(p: int, d: int, axis: int, t: int) -> int:
    """Mask of all indices whose coordinate ``axis`` is < t."""
    stride = p ** axis
    block = (1 << (t * stride)) - 1
    return _repeat(block, p ** (axis + 1), p ** (d - 1 - axis))


def translate_index_bits(spec: GroupSpec, bits: int, shift: Sequence[int]) -> int:
    """Bits of ``{x + shift : x in bits}`` via per-axis cyclic rotations."""
    p = spec.p
    full = (1 << spec.order) - 1
    for axis in range(spec.d):
        c = shift[axis] % p
        if c == 0:
            continue
        stride = p ** axis
        low = _axis_low_mask(p, spec.d, axis, p - c)
        bits = ((bits & low) << (c * stride)) | ((bits & full & ~low) >> ((p - c) * stride))
    return bits


class IndicatorSet:
    """An immutable subset of F_p^d backed by a single bit field."""

    __slots__ = ("spec", "bits", "card")

    def __init__(self, spec: GroupSpec, bits: int):
        if bits < 0 or bits >> spec.order:
            raise InputError("bit field has bits outside the group")
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "card", bits.bit_count())

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("IndicatorSet is immutable")

    # -- constructors ----------------------------------------------------

    @classmethod
    def empty(cls, spec: GroupSpec) -> "IndicatorSet":
        return cls(spec, 0)

    @classmethod
    def full(cls, spec: GroupSpec) -> "IndicatorSet":
        return cls(spec, (1 << spec.order) - 1)

    @classmethod
    def singleton(cls, spec: GroupSpec, coords: Sequence[int]) -> "IndicatorSet":
        return cls(spec, 1 << spec.encode(coords))

    @classmethod
    def from_indices(cls, spec: GroupSpec, indices: Iterable[int]) -> "IndicatorSet":
        bits = 0
        for i in indices:
            if not 0 <= i < spec.order:
                raise InputError(f"index {i} out of range [0, {spec.order})")
            bits |= 1 << i
        return cls(spec, bits)

    @classmethod
    def from_elements(cls, spec: GroupSpec, elems: Iterable[Sequence[int]]) -> "IndicatorSet":
        bits = 0
        for e in elems:
            bits |= 1 << spec.encode(e)
        return cls(spec, bits)

    @classmethod
    def from_sequence(cls, seq: ElementSequence) -> "IndicatorSet":
        """The support of a sequence (multiplicities collapse)."""
        bits = 0
        for v, _ in seq.entries:
            bits |= 1 << seq.spec.encode(v)
        return cls(seq.spec, bits)

    # -- queries -----------------------------------------------------------

    def __len__(self) -> int:
        return self.card

    def __bool__(self) -> bool:
        return self.bits != 0

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IndicatorSet)
            and other.spec == self.spec
            and other.bits == self.bits
        )

    def __hash__(self) -> int:
        return hash((self.spec, self.bits))

    def __repr__(self) -> str:
        return f"IndicatorSet(p={self.spec.p}, d={self.spec.d}, card={self.card})"

    def contains(self, coords: Sequence[int]) -> bool:
        return bool(self.bits >> self.spec.encode(coords) & 1)

    __contains__ = contains

    def contains_index(self, index: int) -> bool:
        if not 0 <= index < self.spec.order:
            raise InputError(f"index {index} out of range [0, {self.spec.order})")
        return bool(self.bits >> index & 1)

    @property
    def is_full(self) -> bool:
        return self.card == self.spec.order

    def indices(self) -> Iterator[int]:
        bits = self.bits
        while bits:
            low = bits & -bits
            yield low.bit_length() - 1
            bits ^= low

    def members(self) -> Iterator[Vector]:
        """Member elements in canonical (index) order."""
        for i in self.indices():
            yield self.spec.decode(i)

    def min_index(self) -> int:
        if not self.bits:
            raise InputError("empty set has no minimum")
        return (self.bits & -self.bits).bit_length() - 1

    # -- boolean algebra ------------------------------------------------------

    def _check(self, other: "IndicatorSet") -> None:
        if other.spec != self.spec:
            raise InputError("set operation across different groups")

    def union(self, other: "IndicatorSet") -> "IndicatorSet":
        self._check(other)
        return IndicatorSet(self.spec, self.bits | other.bits)

    def intersection(self, other: "IndicatorSet") -> "IndicatorSet":
        self._check(other)
        return IndicatorSet(self.spec, self.bits & other.bits)

    def difference(self, other: "IndicatorSet") -> "IndicatorSet":
        self._check(other)
        return IndicatorSet(self.spec, self.bits & ~other.bits)

    def complement(self) -> "IndicatorSet":
        return IndicatorSet(self.spec, ~self.bits & ((1 << self.spec.order) - 1))

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    # -- group actions ----------------------------------------------------------

    def translate(self, shift: Sequence[int]) -> "IndicatorSet":
        shift = self.spec.reduce(shift)
        return IndicatorSet(self.spec, translate_index_bits(self.spec, self.bits, shift))

    def dilate(self, b: int) -> "IndicatorSet":
        """Image under x -> b*x for nonzero b; d = 1 only."""
        if self.spec.d != 1:
            raise DomainError("dilation by a scalar is defined for d = 1 only")
        b %= self.spec.p
        if b == 0:
            raise InputError("dilation factor must be nonzero mod p")
        bits = 0
        for i in self.indices():
            bits |= 1 << (b * i % self.spec.p)
        return IndicatorSet(self.spec, bits)


def sumset(X: IndicatorSet, Y: IndicatorSet) -> IndicatorSet:
    """Exact X + Y, iterating over the smaller operand's members."""
    if X.spec != Y.spec:
        raise InputError("sumset across different groups")
    spec = X.spec
    if not X.bits or not Y.bits:
        return IndicatorSet.empty(spec)
    # Pigeonhole: if |X| + |Y| > |G|, then X and g - Y meet for every g.
    if X.card + Y.card > spec.order:
        return IndicatorSet.full(spec)
    small, big = (X, Y) if X.card <= Y.card else (Y, X)
    acc = 0
    for v in small.members():
        acc |= translate_index_bits(spec, big.bits, v)
        if acc.bit_count() == spec.order:
            break
    return IndicatorSet(spec, acc)


def iterated_sumset(sets: Sequence[IndicatorSet]) -> IndicatorSet:
    """Fold sumset over a nonempty list of sets."""
    if not sets:
        raise InputError("iterated sumset of no sets is undefined")
    acc = sets[0]
    for s in sets[1:]:
        acc = sumset(acc, s)
    return acc


# -- subsequence sums -------------------------------------------------------


def subsums_all(A: ElementSequence) -> IndicatorSet:
    """Sums of all nonempty subsequences of A.

    Folds one term at a time: reach' = reach | (reach + a) | {a}.
    The empty sequence yields the empty set.
    """
    spec = A.spec
    full = (1 << spec.order) - 1
    reach = 0
    for v, m in A.entries:
        for _ in range(m):
            reach = reach | translate_index_bits(spec, reach, v) | (1 << spec.encode(v))
            if reach == full:
                return IndicatorSet(spec, reach)
    return IndicatorSet(spec, reach)


def subsums_layers(A: ElementSequence, max_m: int) -> list[IndicatorSet]:
    """Layer m holds sums of subsequences with exactly m terms, 0 <= m <= max_m.

    One pass over the sequence, so completeness scans over a whole range of
    m cost the same as one exact query at the largest m.
    """
    if max_m < 0:
        raise InputError(f"max_m must be >= 0, got {max_m}")
    spec = A.spec
    cap = min(max_m, A.length)
    layers = [0] * (cap + 1)
    layers[0] = 1 << spec.encode(spec.zero())
    seen = 0
    for v, m in A.entries:
        for _ in range(m):
            seen += 1
            # Descending m keeps each pass independent of its own updates.
            for t in range(min(seen, cap), 0, -1):
                if layers[t - 1]:
                    layers[t] |= translate_index_bits(spec, layers[t - 1], v)
    out = [IndicatorSet(spec, b) for b in layers]
    out.extend(IndicatorSet.empty(spec) for _ in range(max_m - cap))
    return out


def subsums_exact(A: ElementSequence, m: int) -> IndicatorSet:
    """Sums of subsequences of A with exactly m terms (the m-fold restricted sumset)."""
    if not 1 <= m <= A.length:
        raise InputError(f"m must satisfy 1 <= m <= {A.length}, got {m}")
    return subsums_layers(A, m)[m]


def is_zero_sum_free(A: ElementSequence) -> bool:
    """No nonempty subsequence of A sums to zero.  Empty sequences qualify."""
    return not subsums_all(A).contains(A.spec.zero())


def is_incomplete(A: ElementSequence) -> bool:
    """The nonempty subsequence sums of A miss at least one group element."""
    return not subsums_all(A).is_full


def is_m_incomplete(A: ElementSequence, m: int) -> bool:
    """Sums of exactly-m-term subsequences miss at least one group element."""
    return not subsums_exact(A, m).is_full


# -- the growth dichotomy ----------------------------------------------------


@dataclass(frozen=True)
class GrowthWitness:
    """A sequence term a with |(a + Y) \\ (a_prev + Y)| large."""

    element: Vector
    gain: int


@dataclass(frozen=True)
class ConcentratedHyperplane:
    """An affine hyperplane holding many terms of A, counted with multiplicity."""

    flat: AffineFlat
    count: int


def richest_affine_hyperplane(A: ElementSequence) -> ConcentratedHyperplane:
    """The affine hyperplane holding the most terms of A, with multiplicity.

    Ties break toward the canonically first normal, then the smallest
    offset.  For d = 1 the "hyperplanes" are single points.
    """
    if not A.entries:
        raise PreconditionError("cannot scan hyperplanes of an empty sequence")
    spec = A.spec
    best_count = -1
    best: tuple[Vector, int] | None = None
    for n in hyperplane_normals(spec):
        buckets = [0] * spec.p
        for v, m in A.entries:
            buckets[spec.dot(n, v)] += m
        for c in range(spec.p):
            if buckets[c] > best_count:
                best_count = buckets[c]
                best = (n, c)
    assert best is not None
    n, c = best
    space = kernel_of_normal(spec, n)
    # Any point on <n, x> = c serves as the translate; solve on the pivot axis.
    j = next(i for i, ni in enumerate(n) if ni)
    t = [0] * spec.d
    t[j] = c * pow(n[j], spec.p - 2, spec.p) % spec.p
    return ConcentratedHyperplane(AffineFlat(space, tuple(t)), best_count)


def growth_step(
    A: ElementSequence,
    Y: IndicatorSet,
    a_prev: Sequence[int],
    W: float,
) -> GrowthWitness | ConcentratedHyperplane:
    """One step of the expansion dichotomy.

    Either some term a of A satisfies 16 p |(a+Y) \\ (a_prev+Y)| >= W |Y|
    (the best such a is returned, ties to the smallest canonical index), or
    some affine hyperplane holds more than len(A) / (4W) of A's terms with
    multiplicity.  Requires a nonempty Y with 2|Y| <= |G| and a_prev in A.
    """
    spec = A.spec
    if Y.spec != spec:
        raise InputError("Y belongs to a different group")
    if not Y.bits:
        raise PreconditionError("growth step needs a nonempty Y")
    if 2 * Y.card > spec.order:
        raise PreconditionError(
            f"growth step needs 2|Y| <= |G|; got |Y| = {Y.card}, |G| = {spec.order}"
        )
    a_prev = spec.reduce(a_prev)
    if A.multiplicity(a_prev) == 0:
        raise PreconditionError("a_prev must occur in A")
    if W <= 0:
        raise InputError(f"W must be positive, got {W}")

    prev_bits = translate_index_bits(spec, Y.bits, a_prev)
    best_gain = -1
    best_elem: Vector | None = None
    for v, _ in A.entries:
        gain = (translate_index_bits(spec, Y.bits, v) & ~prev_bits).bit_count()
        if gain > best_gain:
            best_gain = gain
            best_elem = v
    assert best_elem is not None
    if 16 * spec.p * best_gain >= W * Y.card:
        return GrowthWitness(best_elem, best_gain)

    rich = richest_affine_hyperplane(A)
    if rich.count * 4 * W > A.length:
        return rich
    raise InternalConsistencyError(
        "expansion dichotomy failed: no expanding term and no concentrated "
        "hyperplane; this indicates a bug in the growth engine"
    )
