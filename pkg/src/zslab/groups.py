"""Arithmetic in the vector space F_p^d.

Elements are coordinate tuples ``(c_0, ..., c_{d-1})`` with entries in
``[0, p)``.  Every element also has a canonical integer index

    index = sum(c_i * p**i),

which is the mixed-radix encoding used by the dense indicator sets and by
all canonical orderings in the package ("canonical order" always means
ascending index).  Subspaces are stored as reduced-row-echelon bases, so
structural equality of ``Subspace`` / ``AffineFlat`` values is semantic
equality.

All types here are immutable and safe to share between threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .errors import DomainError, InputError

Vector = tuple[int, ...]

# Default cap on p**d.  The indicator-set engine allocates one bit per
# group element, so 2**27 cells keeps a single set under ~16 MiB.
DEFAULT_UNIVERSE_CAP = 1 << 27

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for all 64-bit integers."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n == q:
            return True
        if n % q == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
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


@dataclass(frozen=True)
class GroupSpec:
    """The ambient group F_p^d.

    ``universe_cap`` bounds p**d; larger groups are rejected up front so a
    single indicator set can never silently allocate unbounded memory.  The
    cap participates in neither equality nor hashing.
    """

    p: int
    d: int
    universe_cap: int = field(default=DEFAULT_UNIVERSE_CAP, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.d < 1:
            raise InputError(f"dimension must be >= 1, got {self.d}")
        if not is_prime(self.p):
            raise InputError(f"p must be prime, got {self.p}")
        if self.p ** self.d > self.universe_cap:
            raise InputError(
                f"group order p**d = {self.p}**{self.d} exceeds the universe cap "
                f"{self.universe_cap}; pass a larger universe_cap explicitly to "
                f"allocate bigger indicator sets"
            )

    @property
    def order(self) -> int:
        return self.p ** self.d

    # -- element encoding ------------------------------------------------

    def encode(self, coords: Sequence[int]) -> int:
        """Canonical index of an element, sum of coords[i] * p**i."""
        if len(coords) != self.d:
            raise InputError(f"expected {self.d} coordinates, got {len(coords)}")
        idx = 0
        for i, c in enumerate(coords):
            if not 0 <= c < self.p:
                raise InputError(f"coordinate {c} out of range [0, {self.p})")
            idx += c * self.p ** i
        return idx

    def decode(self, index: int) -> Vector:
        if not 0 <= index < self.order:
            raise InputError(f"index {index} out of range [0, {self.order})")
        coords = []
        for _ in range(self.d):
            index, c = divmod(index, self.p)
            coords.append(c)
        return tuple(coords)

    def reduce(self, coords: Sequence[int]) -> Vector:
        """Coordinates folded into [0, p)."""
        if len(coords) != self.d:
            raise InputError(f"expected {self.d} coordinates, got {len(coords)}")
        return tuple(c % self.p for c in coords)

    # -- vector arithmetic -----------------------------------------------

    def zero(self) -> Vector:
        return (0,) * self.d

    def add(self, u: Sequence[int], v: Sequence[int]) -> Vector:
        return tuple((a + b) % self.p for a, b in zip(u, v, strict=True))

    def sub(self, u: Sequence[int], v: Sequence[int]) -> Vector:
        return tuple((a - b) % self.p for a, b in zip(u, v, strict=True))

    def neg(self, u: Sequence[int]) -> Vector:
        return tuple((-a) % self.p for a in u)

    def scale(self, c: int, u: Sequence[int]) -> Vector:
        return tuple(c * a % self.p for a in u)

    def dot(self, u: Sequence[int], v: Sequence[int]) -> int:
        return sum(a * b for a, b in zip(u, v, strict=True)) % self.p

    def all_elements(self) -> Iterator[Vector]:
        """All elements in canonical (index) order."""
        for idx in range(self.order):
            yield self.decode(idx)


def norm(spec: GroupSpec, x: int) -> int:
    """Circular distance from 0 in F_p: min(x mod p, p - x mod p).

    Defined only for d = 1; the norm of p-1 is 1.
    """
    if spec.d != 1:
        raise DomainError(f"norm is defined for d = 1 only, got d = {spec.d}")
    r = x % spec.p
    return min(r, spec.p - r)


# -- row reduction over F_p ----------------------------------------------


def _rref(p: int, rows: list[list[int]]) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form mod p.

    Deterministic: scans columns left to right, takes the first nonzero
    pivot below the current row.  Returns (nonzero rows, pivot columns).
    """
    rows = [list(r) for r in rows]
    nrows = len(rows)
    ncols = len(rows[0]) if rows else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        sel = None
        for i in range(r, nrows):
            if rows[i][c] % p != 0:
                sel = i
                break
        if sel is None:
            continue
        rows[r], rows[sel] = rows[sel], rows[r]
        inv = pow(rows[r][c], p - 2, p)
        rows[r] = [x * inv % p for x in rows[r]]
        for i in range(nrows):
            if i != r and rows[i][c] % p != 0:
                f = rows[i][c]
                rows[i] = [(x - f * y) % p for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return [rows[i] for i in range(r)], pivots


def matrix_rank(p: int, rows: Sequence[Sequence[int]]) -> int:
    reduced, _ = _rref(p, [list(r) for r in rows])
    return len(reduced)


def solve_linear(p: int, columns: Sequence[Sequence[int]], rhs: Sequence[int]) -> list[int] | None:
    """Solve sum_j x_j * columns[j] = rhs over F_p; None if inconsistent."""
    n = len(rhs)
    k = len(columns)
    aug = [[columns[j][i] % p for j in range(k)] + [rhs[i] % p] for i in range(n)]
    reduced, pivots = _rref(p, aug)
    for row, c in zip(reduced, pivots):
        if c == k:  # pivot in the augmented column
            return None
    x = [0] * k
    for row, c in zip(reduced, pivots):
        if c < k:
            x[c] = row[k]
    return x


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of F_p^d, held as its canonical RREF basis.

    Two Subspace values compare equal exactly when they are the same
    subspace, because the RREF basis is unique.
    """

    spec: GroupSpec
    basis: tuple[Vector, ...]
    pivots: tuple[int, ...]

    @classmethod
    def span(cls, spec: GroupSpec, vectors: Sequence[Sequence[int]]) -> "Subspace":
        rows = [[c % spec.p for c in v] for v in vectors]
        for v in rows:
            if len(v) != spec.d:
                raise InputError("spanning vector has wrong length")
        if not rows:
            return cls(spec, (), ())
        reduced, pivots = _rref(spec.p, rows)
        return cls(spec, tuple(tuple(r) for r in reduced), tuple(pivots))

    @classmethod
    def zero(cls, spec: GroupSpec) -> "Subspace":
        return cls(spec, (), ())

    @classmethod
    def full(cls, spec: GroupSpec) -> "Subspace":
        eye = tuple(tuple(1 if i == j else 0 for j in range(spec.d)) for i in range(spec.d))
        return cls(spec, eye, tuple(range(spec.d)))

    @property
    def dim(self) -> int:
        return len(self.basis)

    def reduce(self, v: Sequence[int]) -> Vector:
        """Canonical coset representative of v + self (zeros at pivot columns)."""
        w = [c % self.spec.p for c in v]
        p = self.spec.p
        for row, c in zip(self.basis, self.pivots):
            f = w[c]
            if f:
                for j in range(self.spec.d):
                    w[j] = (w[j] - f * row[j]) % p
        return tuple(w)

    def contains(self, v: Sequence[int]) -> bool:
        return all(c == 0 for c in self.reduce(v))

    def add(self, other: "Subspace") -> "Subspace":
        if other.spec != self.spec:
            raise InputError("subspace sum across different groups")
        return Subspace.span(self.spec, list(self.basis) + list(other.basis))

    def complement(self) -> "Subspace":
        """The canonical complement spanned by standard vectors at non-pivot columns."""
        vecs = []
        for j in range(self.spec.d):
            if j not in self.pivots:
                vecs.append(tuple(1 if i == j else 0 for i in range(self.spec.d)))
        return Subspace.span(self.spec, vecs)

    def members(self) -> Iterator[Vector]:
        """All p**dim members, in lexicographic order of basis coefficients."""
        p = self.spec.p
        for coeffs in itertools.product(range(p), repeat=self.dim):
            v = [0] * self.spec.d
            for c, row in zip(coeffs, self.basis):
                if c:
                    for j in range(self.spec.d):
                        v[j] = (v[j] + c * row[j]) % p
            yield tuple(v)

    def coordinates(self, v: Sequence[int]) -> Vector:
        """Coefficients of v in the RREF basis; raises if v is outside."""
        if not self.contains(v):
            raise InputError("vector lies outside the subspace")
        # With an RREF basis the coefficient of row k is just v[pivot_k].
        return tuple(v[c] % self.spec.p for c in self.pivots)

    def from_coordinates(self, coeffs: Sequence[int]) -> Vector:
        if len(coeffs) != self.dim:
            raise InputError("wrong number of basis coefficients")
        v = [0] * self.spec.d
        p = self.spec.p
        for c, row in zip(coeffs, self.basis):
            for j in range(self.spec.d):
                v[j] = (v[j] + c * row[j]) % p
        return tuple(v)


@dataclass(frozen=True)
class AffineFlat:
    """A coset translate + space; the stored translate is canonical."""

    space: Subspace
    translate: Vector

    def __post_init__(self) -> None:
        object.__setattr__(self, "translate", self.space.reduce(self.translate))

    @property
    def spec(self) -> GroupSpec:
        return self.space.spec

    @property
    def dim(self) -> int:
        return self.space.dim

    def contains(self, v: Sequence[int]) -> bool:
        return self.space.reduce(v) == self.translate

    def members(self) -> Iterator[Vector]:
        spec = self.space.spec
        for w in self.space.members():
            yield spec.add(self.translate, w)


@dataclass(frozen=True)
class LinearMap:
    """A d x d matrix over F_p acting on column vectors of coordinates."""

    spec: GroupSpec
    rows: tuple[Vector, ...]

    @classmethod
    def from_rows(cls, spec: GroupSpec, rows: Sequence[Sequence[int]]) -> "LinearMap":
        if len(rows) != spec.d or any(len(r) != spec.d for r in rows):
            raise InputError(f"matrix must be {spec.d}x{spec.d}")
        return cls(spec, tuple(tuple(c % spec.p for c in r) for r in rows))

    @classmethod
    def identity(cls, spec: GroupSpec) -> "LinearMap":
        return cls.from_rows(
            spec, [[1 if i == j else 0 for j in range(spec.d)] for i in range(spec.d)]
        )

    @property
    def det(self) -> int:
        p = self.spec.p
        m = [list(r) for r in self.rows]
        n = self.spec.d
        det = 1
        for c in range(n):
            sel = None
            for i in range(c, n):
                if m[i][c] % p:
                    sel = i
                    break
            if sel is None:
                return 0
            if sel != c:
                m[c], m[sel] = m[sel], m[c]
                det = -det % p
            det = det * m[c][c] % p
            inv = pow(m[c][c], p - 2, p)
            for i in range(c + 1, n):
                if m[i][c]:
                    f = m[i][c] * inv % p
                    m[i] = [(x - f * y) % p for x, y in zip(m[i], m[c])]
        return det % p

    @property
    def invertible(self) -> bool:
        return self.det != 0

    def apply(self, v: Sequence[int]) -> Vector:
        p = self.spec.p
        return tuple(sum(r[j] * v[j] for j in range(self.spec.d)) % p for r in self.rows)


def is_affine_basis(spec: GroupSpec, vectors: Sequence[Sequence[int]]) -> bool:
    """True when the d+1 given points are in general position.

    Equivalently: the d difference vectors v_i - v_0 are linearly independent.
    """
    if len(vectors) != spec.d + 1:
        raise InputError(f"an affine basis of F_p^{spec.d} has {spec.d + 1} points")
    v0 = vectors[0]
    diffs = [spec.sub(v, v0) for v in vectors[1:]]
    return matrix_rank(spec.p, diffs) == spec.d


def hyperplane_normals(spec: GroupSpec) -> list[Vector]:
    """Canonical normal vectors: first nonzero coordinate 1, lexicographic order.

    There are (p**d - 1)/(p - 1) of them, one per linear hyperplane (d >= 2)
    or one per point-evaluation functional (d = 1).
    """
    out: list[Vector] = []
    for v in itertools.product(range(spec.p), repeat=spec.d):
        for c in v:
            if c:
                if c == 1:
                    out.append(v)
                break
    return out


def kernel_of_normal(spec: GroupSpec, normal: Sequence[int]) -> Subspace:
    """The (d-1)-dimensional solution space of <normal, x> = 0."""
    n = [c % spec.p for c in normal]
    j = next((i for i, c in enumerate(n) if c), None)
    if j is None:
        raise InputError("zero vector is not a hyperplane normal")
    inv = pow(n[j], spec.p - 2, spec.p)
    vecs = []
    for k in range(spec.d):
        if k == j:
            continue
        v = [0] * spec.d
        v[k] = 1
        v[j] = -inv * n[k] % spec.p
        vecs.append(tuple(v))
    return Subspace.span(spec, vecs)


def enumerate_hyperplanes(spec: GroupSpec) -> list[Subspace]:
    """All linear hyperplanes of F_p^d in canonical normal order.

    Affine translates are searched where needed by the structure module;
    this enumeration is the linear skeleton.
    """
    if spec.d < 2:
        raise DomainError("hyperplane enumeration needs d >= 2; {0} is the only proper subspace of F_p")
    return [kernel_of_normal(spec, n) for n in hyperplane_normals(spec)]


def project(spec: GroupSpec, a: Sequence[int], H: Subspace, H2: Subspace) -> tuple[Vector, Vector]:
    """Split a = a_H + a_H2 along a complementary pair H ⊕ H2 = F_p^d."""
    if H.spec != spec or H2.spec != spec:
        raise InputError("subspaces belong to a different group")
    if H.dim + H2.dim != spec.d or matrix_rank(spec.p, list(H.basis) + list(H2.basis)) != spec.d:
        raise InputError("subspaces are not complementary")
    cols = [list(b) for b in H.basis] + [list(b) for b in H2.basis]
    x = solve_linear(spec.p, cols, list(a))
    assert x is not None  # complementary pair always spans
    aH = [0] * spec.d
    for c, row in zip(x[: H.dim], H.basis):
        for j in range(spec.d):
            aH[j] = (aH[j] + c * row[j]) % spec.p
    a_H = tuple(aH)
    a_H2 = spec.sub(a, a_H)
    return a_H, a_H2
