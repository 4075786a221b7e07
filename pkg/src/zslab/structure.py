"""Structure theory for long sequences in F_p^d.

The centerpiece is ``decompose``: given a sequence A of length at least
delta*p, either certify that the sums of exactly-m-term subsequences cover
the whole group for some small m, or partition A into a small exceptional
part A_0 plus equal-size blocks, each block inside one coset of a common
subspace H, with m*A_0 covering a full coset of H.  Every returned
decomposition is re-verified exactly before it leaves this module; when the
machinery cannot establish either arm at the given parameters (routine at
small p, where the underlying asymptotics have no room), the result is a
structured ``Inconclusive`` rather than an exception.

Supporting machinery, all exact: disjoint affine-basis extraction, the
half-space growth loop, the rich-hyperplane/completeness dichotomy, the
d = 1 dilation classification, and the dimension-increment composition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import InputError, InternalConsistencyError, PreconditionError
from .groups import AffineFlat, GroupSpec, Subspace, Vector, matrix_rank, norm, project
from .sequences import ElementSequence
from .sumsets import (
    ConcentratedHyperplane,
    GrowthWitness,
    IndicatorSet,
    growth_step,
    iterated_sumset,
    richest_affine_hyperplane,
    subsums_all,
    subsums_exact,
    subsums_layers,
    sumset,
    translate_index_bits,
)

_TOL = 1e-9


def _ifloor(x: float) -> int:
    """Float-tolerant floor for budget formulas like floor(alpha*p)."""
    return math.floor(x + _TOL)


def _iceil(x: float) -> int:
    return math.ceil(x - _TOL)


# -- domain types ------------------------------------------------------------


@dataclass(frozen=True)
class DecompositionParams:
    """Tunable constants of the decomposition machinery.

    epsilon = None selects a downward search: block fractions alpha/2,
    alpha/4, ... are tried until an arm succeeds or the block size drops
    below 2.
    """

    alpha: float = 0.25
    beta: float = 0.5
    delta: float = 0.5
    w: float = 64.0
    epsilon: float | None = None

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "delta"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise InputError(f"{name} must lie in (0, 1], got {v}")
        if self.w < 1:
            raise InputError(f"W must be >= 1, got {self.w}")
        if self.epsilon is not None:
            if not 0 < self.epsilon <= 1:
                raise InputError(f"epsilon must lie in (0, 1], got {self.epsilon}")
            if self.epsilon > self.alpha + _TOL:
                raise InputError(
                    f"epsilon must not exceed alpha, got {self.epsilon} > {self.alpha}"
                )


@dataclass(frozen=True)
class CompletenessWitness:
    """Certifies m*A = F_p^d for the given m; m = None certifies S_A = F_p^d."""

    m: int | None = None


@dataclass(frozen=True)
class Decomposition:
    """A verified partition A = A0 + blocks per the structure theorem."""

    A0: ElementSequence
    blocks: tuple[ElementSequence, ...]
    H: Subspace
    m_witness: int
    translate_witness: Vector
    block_size: int
    epsilon_used: float


@dataclass(frozen=True)
class DilationDecomposition:
    """b*A split into a small exceptional part and a small-norm bulk.

    A_flat and A_sharp partition the dilated sequence b*A; the norms of
    A_sharp's terms sum to less than p.  meets_flat_bound records whether
    |A_flat| <= p^(12/13), the regime where the classification theorem's
    conclusion holds as stated.
    """

    b: int
    A_flat: ElementSequence
    A_sharp: ElementSequence
    meets_flat_bound: bool


@dataclass(frozen=True)
class RichHyperplane:
    """An affine hyperplane holding at least ceil(epsilon_used * p) terms of A."""

    flat: AffineFlat
    count: int
    epsilon_used: float


@dataclass(frozen=True)
class Inconclusive:
    """Neither arm established at these parameters; diagnostics attached."""

    stage: str
    message: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GrowthRound:
    a_prev: Vector
    element: Vector
    gain: int
    size_before: int


@dataclass(frozen=True)
class GrowthRun:
    """Result of grow_to_half_space; iterable as (grown, used)."""

    grown: IndicatorSet
    used: tuple[Vector, ...]
    rounds: tuple[GrowthRound, ...]
    outcome: str  # half_space | pool_exhausted | step_cap | concentrated
    concentration: ConcentratedHyperplane | None = None

    def __iter__(self):
        return iter((self.grown, self.used))


@dataclass(frozen=True)
class VerificationReport:
    partition_ok: bool
    a0_budget_ok: bool
    block_size_ok: bool
    block_flat_ok: bool
    witness_ok: bool
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.partition_ok
            and self.a0_budget_ok
            and self.block_size_ok
            and self.block_flat_ok
            and self.witness_ok
        )


# -- affine bases and growth ------------------------------------------------------


def _lift(v: Sequence[int]) -> tuple[int, ...]:
    # Affine independence of points = linear independence of (1, v) lifts.
    return (1, *v)


def extract_disjoint_affine_bases(
    A: ElementSequence, count: int
) -> tuple[list[tuple[Vector, ...]], ElementSequence]:
    """Greedily extract up to ``count`` pairwise-disjoint affine bases from A.

    Each round scans the remaining terms in canonical order and keeps any
    term that enlarges the affinely independent family; a round that stalls
    before reaching d+1 points returns its picks to the remainder and stops
    the extraction.  Affine independence is matroidal, so a round succeeds
    exactly when the remainder still has full affine rank.
    """
    if count < 1:
        raise InputError(f"count must be >= 1, got {count}")
    spec = A.spec
    p = spec.p
    bases: list[tuple[Vector, ...]] = []
    remainder = A
    while len(bases) < count:
        chosen: list[Vector] = []
        lifted: list[tuple[int, ...]] = []
        rank = 0
        for v, _ in remainder.entries:
            cand = lifted + [_lift(v)]
            r = matrix_rank(p, cand)
            if r > rank:
                chosen.append(v)
                lifted = cand
                rank = r
                if rank == spec.d + 1:
                    break
        if rank < spec.d + 1:
            break
        bases.append(tuple(chosen))
        remainder = remainder.subtract(ElementSequence.from_elements(spec, chosen))
    return bases, remainder


def grow_to_half_space(
    seed: IndicatorSet, pool: ElementSequence, W: float, step_cap: int
) -> GrowthRun:
    """Expand seed via growth_step rounds until it covers more than half the group.

    Each round takes the canonically smallest pool term a' as the pivot,
    asks growth_step for an expanding term a, replaces Y with
    (a' + Y) | (a + Y), and consumes both terms.  Stops on success, pool
    exhaustion (fewer than two terms left), the round cap, or a concentrated
    hyperplane; the stopping reason is data, not an error.
    """
    spec = seed.spec
    if pool.spec != spec:
        raise InputError("pool belongs to a different group")
    if not seed.bits:
        raise PreconditionError("growth needs a nonempty seed")
    if not pool:
        raise PreconditionError("growth needs a nonempty pool")
    if step_cap < 0:
        raise InputError(f"step_cap must be >= 0, got {step_cap}")

    Y = seed
    remaining = pool
    used: list[Vector] = []
    rounds: list[GrowthRound] = []
    concentration = None
    while True:
        if 2 * Y.card > spec.order:
            outcome = "half_space"
            break
        if len(rounds) >= step_cap:
            outcome = "step_cap"
            break
        if remaining.length < 2:
            outcome = "pool_exhausted"
            break
        a_prev = remaining.entries[0][0]
        step = growth_step(remaining, Y, a_prev, W)
        if isinstance(step, ConcentratedHyperplane):
            outcome = "concentrated"
            concentration = step
            break
        assert isinstance(step, GrowthWitness)
        size_before = Y.card
        Y = Y.translate(a_prev).union(Y.translate(step.element))
        rounds.append(GrowthRound(a_prev, step.element, step.gain, size_before))
        used.extend((a_prev, step.element))
        remaining = remaining.subtract(
            ElementSequence.from_elements(spec, (a_prev, step.element))
        )
    return GrowthRun(Y, tuple(used), tuple(rounds), outcome, concentration)


# -- the rich-hyperplane / completeness dichotomy ---------------------------------


def _epsilon_candidates(params: DecompositionParams, p: int) -> list[tuple[float, int]]:
    """(epsilon, block size) candidates, largest first.

    Explicit epsilon gives the single pair (epsilon, ceil(epsilon*p)).  The
    downward search quantizes each rung to an integer block size s and uses
    epsilon = s/p, so the richness threshold and the carved block size agree.
    """
    if params.epsilon is not None:
        return [(params.epsilon, _iceil(params.epsilon * p))]
    out: list[tuple[float, int]] = []
    x = params.alpha * p / 2
    seen: set[int] = set()
    while _ifloor(x) >= 2:
        s = _ifloor(x)
        if s not in seen:
            seen.add(s)
            out.append((s / p, s))
        x /= 2
    return out


def _growth_completeness(
    A: ElementSequence, params: DecompositionParams
) -> tuple[CompletenessWitness | None, dict]:
    """Two-sided growth: build disjoint half-space sets and certify m*A = G."""
    spec = A.spec
    p, d = spec.p, spec.d
    c1 = min(params.beta, params.delta) / (4 * (d + 1))
    s = _ifloor(c1 * p)
    diag: dict = {"family_size": s}
    if s < 1:
        diag["growth"] = "infeasible: basis family size floor(c1*p) < 1"
        return None, diag
    bases, remainder = extract_disjoint_affine_bases(A, 2 * s)
    diag["bases_found"] = len(bases)
    if len(bases) < 2 * s:
        diag["growth"] = f"infeasible: only {len(bases)} of {2 * s} disjoint affine bases"
        return None, diag

    seed_e = iterated_sumset(
        [IndicatorSet.from_elements(spec, b) for b in bases[:s]]
    )
    seed_f = iterated_sumset(
        [IndicatorSet.from_elements(spec, b) for b in bases[s : 2 * s]]
    )
    occ = list(remainder.occurrences())
    if len(occ) % 2:
        occ = occ[:-1]
    pool_e = ElementSequence.from_elements(spec, occ[0::2])
    pool_f = ElementSequence.from_elements(spec, occ[1::2])
    step_cap = _ifloor(min(params.beta * p / 4, params.delta * p / 16))

    runs = []
    for seed, pool in ((seed_e, pool_e), (seed_f, pool_f)):
        if 2 * seed.card > spec.order:
            runs.append(GrowthRun(seed, (), (), "half_space"))
        elif not pool:
            runs.append(GrowthRun(seed, (), (), "pool_exhausted"))
        else:
            runs.append(grow_to_half_space(seed, pool, params.w, step_cap))
    run_e, run_f = runs
    diag["growth_outcomes"] = [run_e.outcome, run_f.outcome]
    diag["growth_cards"] = [run_e.grown.card, run_f.grown.card]
    if run_e.outcome != "half_space" or run_f.outcome != "half_space":
        return None, diag

    m = 2 * s + len(run_e.rounds) + len(run_f.rounds)
    diag["m"] = m
    if m > params.beta * p + _TOL:
        diag["growth"] = f"m = {m} exceeds beta*p = {params.beta * p}"
        return None, diag
    combined = sumset(run_e.grown, run_f.grown)
    if not combined.is_full or not subsums_exact(A, m).is_full:
        raise InternalConsistencyError(
            "two half-space sets failed to certify completeness; "
            "the growth bookkeeping is broken"
        )
    return CompletenessWitness(m), diag


def find_rich_hyperplane(
    A: ElementSequence, params: DecompositionParams
) -> RichHyperplane | CompletenessWitness | Inconclusive:
    """Either an affine hyperplane rich in terms of A, or a completeness certificate.

    Scans all affine hyperplanes for the richest (with multiplicity).  For
    each epsilon candidate, descending: if the best count meets the
    threshold, that hyperplane wins; otherwise the two-sided growth
    construction is attempted once.  Inconclusive carries the best count
    and the growth diagnostics.
    """
    spec = A.spec
    p = spec.p
    if A.length < params.delta * p - _TOL:
        raise PreconditionError(
            f"need length(A) >= delta*p = {params.delta * p}, got {A.length}"
        )
    rich = richest_affine_hyperplane(A)
    growth_result: CompletenessWitness | None = None
    growth_diag: dict | None = None
    candidates = _epsilon_candidates(params, p)
    for eps, threshold in candidates:
        if rich.count >= threshold:
            return RichHyperplane(rich.flat, rich.count, eps)
        if growth_diag is None:
            growth_result, growth_diag = _growth_completeness(A, params)
        if growth_result is not None:
            return growth_result
    return Inconclusive(
        "find_rich_hyperplane",
        "no hyperplane met any epsilon threshold and the growth construction "
        "did not reach two half-space sets",
        {
            "best_count": rich.count,
            "thresholds_tried": [t for _, t in candidates],
            "growth": growth_diag if growth_diag is not None else "not attempted",
        },
    )


# -- d = 1 dilation classification ------------------------------------------------


def _dilation_split(
    A: ElementSequence, b: int
) -> tuple[ElementSequence, ElementSequence, int]:
    """Split b*A greedily: small norms into the sharp part while the sum stays < p."""
    spec = A.spec
    dilated = A.dilate(b)
    occ = sorted(dilated.occurrences(), key=lambda v: (norm(spec, v[0]), v[0]))
    running = 0
    cut = len(occ)
    for i, v in enumerate(occ):
        n = norm(spec, v[0])
        if running + n < spec.p:
            running += n
        else:
            cut = i
            break
    sharp = ElementSequence.from_elements(spec, occ[:cut])
    flat = ElementSequence.from_elements(spec, occ[cut:])
    return flat, sharp, running


def _best_dilation(A: ElementSequence) -> DilationDecomposition:
    spec = A.spec
    best: tuple[int, int] | None = None  # (|A_flat|, b)
    best_split = None
    for b in range(1, spec.p):
        flat, sharp, _ = _dilation_split(A, b)
        key = (flat.length, b)
        if best is None or key < best:
            best = key
            best_split = (b, flat, sharp)
    assert best_split is not None
    b, flat, sharp = best_split
    meets = flat.length <= spec.p ** (12 / 13) + _TOL
    return DilationDecomposition(b, flat, sharp, meets)


def classify_d1(A: ElementSequence) -> DilationDecomposition | CompletenessWitness:
    """d = 1 dichotomy: either S_A = F_p, or a dilation b*A splits into a
    small exceptional part plus a part whose norms sum to less than p."""
    spec = A.spec
    if spec.d != 1:
        raise PreconditionError(f"classify_d1 requires d = 1, got d = {spec.d}")
    if not A:
        raise PreconditionError("classify_d1 needs a nonempty sequence")
    if subsums_all(A).is_full:
        return CompletenessWitness(None)
    return _best_dilation(A)


# -- dimension increment -----------------------------------------------------------


def _space_mask(space: Subspace) -> int:
    bits = 0
    spec = space.spec
    for v in space.members():
        bits |= 1 << spec.encode(v)
    return bits


def _find_coset_translate(S: IndicatorSet, H: Subspace) -> Vector | None:
    """Canonical representative of the first full H-coset inside S, if any."""
    spec = S.spec
    base = _space_mask(H)
    seen: set[Vector] = set()
    for idx in S.indices():
        rep = H.reduce(spec.decode(idx))
        if rep in seen:
            continue
        seen.add(rep)
        mask = translate_index_bits(spec, base, rep)
        if mask & ~S.bits == 0:
            return rep
    return None


def dimension_increment(
    A1: ElementSequence,
    m1: int,
    H1: Subspace,
    A2: ElementSequence,
    m2: int,
    H1c: Subspace,
    H2: Subspace,
) -> AffineFlat:
    """Compose two translate-of-subspace certificates into one for H1 + H2.

    Requires H1 and H1c complementary, H2 inside H1c, a translate of H1
    inside m1*A1, and a translate of H2 inside m2 * (projection of A2 onto
    H1c along H1).  The returned flat v + (H1 + H2) is rechecked exactly
    against m1*A1 + m2*A2.
    """
    spec = A1.spec
    if A2.spec != spec or H1.spec != spec or H1c.spec != spec or H2.spec != spec:
        raise InputError("all arguments must share one group")
    if (
        H1.dim + H1c.dim != spec.d
        or matrix_rank(spec.p, list(H1.basis) + list(H1c.basis)) != spec.d
    ):
        raise PreconditionError("H1 and H1c are not complementary")
    if not all(H1c.contains(v) for v in H2.basis):
        raise PreconditionError("H2 is not contained in H1c")
    if not 1 <= m1 <= A1.length:
        raise PreconditionError(f"m1 = {m1} out of range for |A1| = {A1.length}")
    if not 1 <= m2 <= A2.length:
        raise PreconditionError(f"m2 = {m2} out of range for |A2| = {A2.length}")

    S1 = subsums_exact(A1, m1)
    v1 = _find_coset_translate(S1, H1)
    if v1 is None:
        raise PreconditionError("m1*A1 contains no translate of H1")

    projected = ElementSequence.from_elements(
        spec, (project(spec, v, H1, H1c)[1] for v in A2.occurrences())
    )
    S2 = subsums_exact(projected, m2)
    v2 = _find_coset_translate(S2, H2)
    if v2 is None:
        raise PreconditionError(
            "m2 * (projection of A2 onto H1c) contains no translate of H2"
        )

    flat = AffineFlat(H1.add(H2), spec.add(v1, v2))
    total = sumset(S1, subsums_exact(A2, m2))
    for w in flat.members():
        if not total.contains(w):
            raise InternalConsistencyError(
                "composed flat escapes m1*A1 + m2*A2; increment bookkeeping is broken"
            )
    return flat


# -- the main decomposition --------------------------------------------------------


def _round_robin_occurrences(entries: Sequence[tuple[Vector, int]]) -> list[Vector]:
    """First copies of each distinct term in canonical order, then second copies, ..."""
    out: list[Vector] = []
    if not entries:
        return out
    max_mult = max(m for _, m in entries)
    for copy in range(max_mult):
        for v, m in entries:
            if m > copy:
                out.append(v)
    return out


def _verified_completeness(A: ElementSequence, m: int) -> CompletenessWitness:
    if not subsums_exact(A, m).is_full:
        raise InternalConsistencyError(
            f"claimed {m}-completeness failed exact verification"
        )
    return CompletenessWitness(m)


def _carve_constant_runs(
    A: ElementSequence, params: DecompositionParams
) -> Decomposition | None:
    """H = {0} fallback: blocks are constant runs of one repeated element."""
    spec = A.spec
    p = spec.p
    if params.epsilon is not None:
        sizes = [_ifloor(params.epsilon * p)] if _ifloor(params.epsilon * p) >= 1 else []
    else:
        sizes = [s for _, s in _epsilon_candidates(params, p)]
    for s in sizes:
        blocks: list[ElementSequence] = []
        leftover: list[tuple[Vector, int]] = []
        for v, mult in A.entries:
            nb, rem = divmod(mult, s)
            blocks.extend(
                ElementSequence.from_pairs(spec, [(v, s)]) for _ in range(nb)
            )
            if rem:
                leftover.append((v, rem))
        if not blocks:
            continue
        A0 = ElementSequence.from_pairs(spec, leftover)
        if not A0:
            A0 = blocks[-1]
            blocks = blocks[:-1]
        if A0.length > params.alpha * p + _TOL:
            continue
        D = Decomposition(
            A0,
            tuple(blocks),
            Subspace.zero(spec),
            1,
            A0.entries[0][0],
            s,
            s / p,
        )
        if verify_decomposition(A, D, params).passed:
            return D
    return None


def _peel_blocks(
    A: ElementSequence, params: DecompositionParams, delta0: float
) -> (
    tuple[ElementSequence, list[tuple[ElementSequence, AffineFlat]], int, float]
    | CompletenessWitness
    | Inconclusive
):
    """Repeatedly carve rich-hyperplane blocks until the residue is short.

    Returns (B0, [(block, flat)], block size, epsilon) on success.  A
    completeness certificate found for a residue transfers to A (every
    subsequence of the residue is one of A) and is returned directly.
    """
    spec = A.spec
    p = spec.p
    residue = A
    blocks: list[tuple[ElementSequence, AffineFlat]] = []
    eps0: float | None = params.epsilon
    s0: int | None = None
    while residue.length >= delta0 * p - _TOL:
        fr_params = replace(params, delta=delta0, epsilon=eps0)
        res = find_rich_hyperplane(residue, fr_params)
        if isinstance(res, CompletenessWitness):
            assert res.m is not None
            return _verified_completeness(A, res.m)
        if isinstance(res, Inconclusive):
            return Inconclusive(
                "peeling",
                f"residue of length {residue.length} has no rich hyperplane "
                "and no growth certificate",
                {"blocks_peeled": len(blocks), "inner": res.diagnostics},
            )
        if s0 is None:
            eps0 = res.epsilon_used
            s0 = _ifloor(eps0 * p)
            if s0 < 1:
                return Inconclusive(
                    "peeling", f"epsilon = {eps0} gives empty blocks at p = {p}", {}
                )
        in_flat = [(v, m) for v, m in residue.entries if res.flat.contains(v)]
        occ = _round_robin_occurrences(in_flat)
        block = ElementSequence.from_elements(spec, occ[:s0])
        blocks.append((block, res.flat))
        residue = residue.subtract(block)
    assert eps0 is not None and s0 is not None
    return residue, blocks, s0, eps0


def _coset_cover_translate(
    layer: IndicatorSet, space: Subspace, reps: list[Vector], space_bits: int
) -> Vector | None:
    """First rep whose space-coset lies wholly inside layer."""
    spec = layer.spec
    for rep in reps:
        mask = translate_index_bits(spec, space_bits, rep)
        if mask & ~layer.bits == 0:
            return rep
    return None


def _case1_trigger(
    blocks: list[tuple[ElementSequence, AffineFlat]], params: DecompositionParams
) -> tuple[int, int, Vector] | None:
    """Smallest m (then smallest block index) with m*B_i covering a D_i-coset."""
    if not blocks:
        return None
    spec = blocks[0][0].spec
    p = spec.p
    mcap = _ifloor(params.beta * p / 2)
    per_block: list[tuple[list[IndicatorSet], Subspace, list[Vector], int]] = []
    space_bits_cache: dict[Subspace, int] = {}
    for block, flat in blocks:
        cap = min(mcap, block.length)
        layers = subsums_layers(block, cap) if cap >= 1 else []
        space = flat.space
        if space not in space_bits_cache:
            space_bits_cache[space] = _space_mask(space)
        reps = list(space.complement().members())
        per_block.append((layers, space, reps, cap))
    coset_card = p ** (spec.d - 1)
    for m in range(1, mcap + 1):
        for i, (layers, space, reps, cap) in enumerate(per_block):
            if m > cap:
                continue
            layer = layers[m]
            if layer.card < coset_card:
                continue
            rep = _coset_cover_translate(layer, space, reps, space_bits_cache[space])
            if rep is not None:
                return i, m, rep
    return None


def _decompose_case1(
    A: ElementSequence,
    blocks: list[tuple[ElementSequence, AffineFlat]],
    trigger: tuple[int, int, Vector],
    params: DecompositionParams,
    eps0: float,
    norm_cutoff: float | None,
) -> Decomposition | CompletenessWitness | Inconclusive:
    """Regroup around one block whose m-fold sums already cover a hyperplane.

    The rest of A is fibered by its projection onto the 1-dimensional
    complement of the hyperplane direction and carved fiber-by-fiber into
    equal blocks.  Candidate block sizes descend from floor(alpha*p); the
    classification-theorem candidate (cutoff norms and the flat part of the
    best dilation routed into A0, block fraction alpha/2M) is tried as well.
    First exactly-verified partition wins.
    """
    spec = A.spec
    p = spec.p
    i, m1, v1 = trigger
    B1 = blocks[i][0]
    H = blocks[i][1].space
    Hc = H.complement()
    rest = A.subtract(B1)

    line = GroupSpec(p, 1)
    fibers: dict[int, list[Vector]] = {}
    values: list[int] = []
    for x in rest.occurrences():
        _, x_hc = project(spec, x, H, Hc)
        val = Hc.coordinates(x_hc)[0]
        fibers.setdefault(val, []).append(x)
        values.append(val)
    A_line = ElementSequence.from_elements(line, [(v,) for v in values])

    # If the projected sequence is m-complete for small m, the hyperplane
    # certificate lifts to full-group completeness for A itself.
    m2cap = min(_ifloor(params.beta * p / 2), rest.length)
    if m2cap >= 1:
        line_layers = subsums_layers(A_line, m2cap)
        for m2 in range(1, m2cap + 1):
            if line_layers[m2].is_full:
                return _verified_completeness(A, m1 + m2)

    removal_counts: dict[int, int] | None = None
    cls = classify_d1(A_line)
    if isinstance(cls, DilationDecomposition):
        cutoff = norm_cutoff if norm_cutoff is not None else 2.0 / eps0
        b_inv = pow(cls.b, p - 2, p)
        removal_counts = {}
        for v, mult in cls.A_flat.entries:
            removal_counts[b_inv * v[0] % p] = (
                removal_counts.get(b_inv * v[0] % p, 0) + mult
            )
        for v, mult in cls.A_sharp.entries:
            if norm(line, v[0]) >= cutoff - _TOL:
                removal_counts[b_inv * v[0] % p] = (
                    removal_counts.get(b_inv * v[0] % p, 0) + mult
                )

    if params.epsilon is not None:
        base_sizes = [_ifloor(params.epsilon * p)]
    else:
        base_sizes = []
        x = params.alpha * p
        seen: set[int] = set()
        while _ifloor(x) >= 2:
            s = _ifloor(x)
            if s not in seen:
                seen.add(s)
                base_sizes.append(s)
            x /= 2

    variants: list[tuple[int, dict[int, int] | None]] = [(s, None) for s in base_sizes]
    if removal_counts is not None:
        kept = dict(fibers)
        m_distinct = 0
        for val in sorted(kept):
            if len(kept[val]) > removal_counts.get(val, 0):
                m_distinct += 1
        if m_distinct >= 1:
            if params.epsilon is not None:
                variants.extend((s, removal_counts) for s in base_sizes)
            else:
                s_paper = _ifloor(params.alpha * p / (2 * m_distinct))
                if s_paper >= 1:
                    variants.append((s_paper, removal_counts))

    attempts: list[dict] = []
    for s, removal in variants:
        if s < 1:
            continue
        a0_occ: list[Vector] = list(B1.occurrences())
        out_blocks: list[ElementSequence] = []
        for val in sorted(fibers):
            occ = fibers[val]
            k = min(removal.get(val, 0), len(occ)) if removal else 0
            a0_occ.extend(occ[:k])
            body = occ[k:]
            nb = len(body) // s
            for j in range(nb):
                out_blocks.append(
                    ElementSequence.from_elements(spec, body[j * s : (j + 1) * s])
                )
            a0_occ.extend(body[nb * s :])
        A0 = ElementSequence.from_elements(spec, a0_occ)
        if A0.length > params.alpha * p + _TOL:
            attempts.append({"block_size": s, "a0_length": A0.length, "ok": False})
            continue
        D = Decomposition(A0, tuple(out_blocks), H, m1, v1, s, s / p)
        report = verify_decomposition(A, D, params)
        if report.passed:
            return D
        attempts.append(
            {"block_size": s, "a0_length": A0.length, "failed": report.details}
        )
    return Inconclusive(
        "case1_regroup",
        "no fiber carving met the A0 budget with verified invariants",
        {"trigger_block": i, "m": m1, "attempts": attempts},
    )


def _decompose_case2(
    A: ElementSequence,
    B0: ElementSequence,
    blocks: list[tuple[ElementSequence, AffineFlat]],
    params: DecompositionParams,
    norm_cutoff: float | None,
) -> Decomposition | Inconclusive:
    """Recurse inside each block's hyperplane direction and assemble the results.

    Every block is translated to pass through 0, rewritten in coordinates of
    its direction subspace, and decomposed in F_p^{d-1} at a shared block
    size; child certificates compose by summation (the dimension-increment
    argument) into one certificate for H = H_1 + ... + H_h.
    """
    spec = A.spec
    p = spec.p
    h = len(blocks)
    s0 = blocks[0][0].length
    alpha_child = min(params.alpha, params.beta) / (2 * h)
    beta_child = params.beta / 2
    delta_child = min(params.delta, s0 / p)

    child_specs = []
    for block, flat in blocks:
        space = flat.space
        t = flat.translate
        coords = [
            space.coordinates(spec.sub(x, t)) for x in block.occurrences()
        ]
        child_specs.append((space, t, coords))

    sizes: list[int] = []
    x = alpha_child * p
    seen: set[int] = set()
    while _ifloor(x) >= 2:
        sc = _ifloor(x)
        if sc not in seen:
            seen.add(sc)
            sizes.append(sc)
        x /= 2
    if not sizes:
        return Inconclusive(
            "case2",
            f"child block ladder empty: alpha_child*p = {alpha_child * p:.3f} < 2",
            {"h": h, "alpha_child": alpha_child},
        )

    child_group = GroupSpec(p, spec.d - 1)
    failures: list[dict] = []
    for sc in sizes:
        try:
            child_params = DecompositionParams(
                alpha=alpha_child,
                beta=beta_child,
                delta=delta_child,
                w=params.w,
                epsilon=sc / p,
            )
        except InputError:
            continue
        children: list[Decomposition] = []
        failed = None
        for idx, (space, t, coords) in enumerate(child_specs):
            child_seq = ElementSequence.from_elements(child_group, coords)
            result = decompose(child_seq, child_params, norm_cutoff=norm_cutoff)
            if not isinstance(result, Decomposition):
                failed = {
                    "block": idx,
                    "child_size": sc,
                    "result": type(result).__name__,
                }
                if isinstance(result, Inconclusive):
                    failed["stage"] = result.stage
                break
            children.append(result)
        if failed is not None:
            failures.append(failed)
            continue

        # Assemble: lift child pieces back through each block's coordinates.
        def lift_seq(i: int, seq: ElementSequence, shift: bool) -> ElementSequence:
            space, t, _ = child_specs[i]
            elems = []
            for w in seq.occurrences():
                v = space.from_coordinates(w)
                elems.append(spec.add(v, t) if shift else v)
            return ElementSequence.from_elements(spec, elems)

        out_blocks: list[ElementSequence] = []
        a0 = B0
        h_total = Subspace.zero(spec)
        m_total = 0
        v_total = spec.zero()
        for i, child in enumerate(children):
            space, t, _ = child_specs[i]
            for cb in child.blocks:
                out_blocks.append(lift_seq(i, cb, shift=True))
            a0 = a0 + lift_seq(i, child.A0, shift=True)
            lifted_h = Subspace.span(
                spec, [space.from_coordinates(row) for row in child.H.basis]
            )
            h_total = h_total.add(lifted_h)
            m_total += child.m_witness
            v_total = spec.add(
                v_total,
                spec.add(
                    space.from_coordinates(child.translate_witness),
                    spec.scale(child.m_witness, t),
                ),
            )
        if not a0:
            failures.append({"child_size": sc, "reason": "empty A0"})
            continue
        D = Decomposition(a0, tuple(out_blocks), h_total, m_total, v_total, sc, sc / p)
        report = verify_decomposition(A, D, params)
        if report.passed:
            return D
        failures.append({"child_size": sc, "failed": report.details})
    return Inconclusive(
        "case2",
        "no shared child block size produced a verified assembly",
        {"h": h, "sizes_tried": sizes, "failures": failures},
    )


def decompose(
    A: ElementSequence,
    params: DecompositionParams | None = None,
    norm_cutoff: float | None = None,
) -> Decomposition | CompletenessWitness | Inconclusive:
    """Main dichotomy: a small-m completeness certificate or a verified partition.

    Pipeline: (0) scan m = 1..floor(beta*p) for exact m-completeness;
    (1) for d >= 2, peel rich-hyperplane blocks and branch on whether some
    block's m-fold sums already cover a coset of its hyperplane (regroup
    there) or not (recurse inside each hyperplane and compose); (2) fall
    back to the H = {0} constant-run carve.  Every emitted decomposition
    passes verify_decomposition; failures surface as Inconclusive with
    diagnostics, never as unverified output.

    norm_cutoff tunes which dilated norms count as exceptional during the
    Case-1 regrouping (default 2/epsilon0, the peel block fraction).
    """
    if params is None:
        params = DecompositionParams()
    spec = A.spec
    p = spec.p
    if A.length < params.delta * p - _TOL:
        raise PreconditionError(
            f"need length(A) >= delta*p = {params.delta * p}, got {A.length}"
        )

    cap = min(_ifloor(params.beta * p), A.length)
    if cap >= 1:
        layers = subsums_layers(A, cap)
        for m in range(1, cap + 1):
            if layers[m].is_full:
                return CompletenessWitness(m)

    pipeline_result: Inconclusive | None = None
    if spec.d >= 2:
        delta0 = min(params.delta, params.alpha / 2)
        peeled = _peel_blocks(A, params, delta0)
        if isinstance(peeled, CompletenessWitness):
            return peeled
        if isinstance(peeled, Inconclusive):
            pipeline_result = peeled
        else:
            B0, blocks, s0, eps0 = peeled
            trigger = _case1_trigger(blocks, params)
            if trigger is not None:
                result = _decompose_case1(A, blocks, trigger, params, eps0, norm_cutoff)
            else:
                result = _decompose_case2(A, B0, blocks, params, norm_cutoff)
            if not isinstance(result, Inconclusive):
                return result
            pipeline_result = result

    carve = _carve_constant_runs(A, params)
    if carve is not None:
        return carve
    if pipeline_result is not None:
        return pipeline_result
    diagnostics: dict = {"length": A.length}
    if spec.d == 1:
        cls = classify_d1(A)
        if isinstance(cls, DilationDecomposition):
            diagnostics["dilation"] = {
                "b": cls.b,
                "flat_length": cls.A_flat.length,
                "meets_flat_bound": cls.meets_flat_bound,
            }
    return Inconclusive(
        "decompose",
        "no completeness certificate and no verifiable carving at these parameters",
        diagnostics,
    )


def verify_decomposition(
    A: ElementSequence, D: Decomposition, params: DecompositionParams
) -> VerificationReport:
    """Exact check of every structure-theorem clause; never raises on failure."""
    spec = A.spec
    p = spec.p
    details: dict = {}

    combined = D.A0
    for b in D.blocks:
        combined = combined + b
    partition_ok = combined == A
    if not partition_ok:
        details["partition"] = (
            f"A0 + blocks has length {combined.length}, input has {A.length}"
        )

    a0_budget_ok = D.A0.length <= params.alpha * p + _TOL
    if not a0_budget_ok:
        details["a0_budget"] = f"|A0| = {D.A0.length} > alpha*p = {params.alpha * p}"

    block_size_ok = all(b.length == D.block_size for b in D.blocks)
    if block_size_ok and params.epsilon is not None:
        block_size_ok = D.block_size == _ifloor(params.epsilon * p)
    if not block_size_ok:
        details["block_size"] = (
            f"expected uniform size {D.block_size}"
            + (
                f" = floor(epsilon*p) = {_ifloor(params.epsilon * p)}"
                if params.epsilon is not None
                else ""
            )
        )

    block_flat_ok = True
    for i, b in enumerate(D.blocks):
        reps = {D.H.reduce(v) for v, _ in b.entries}
        if len(reps) > 1:
            block_flat_ok = False
            details.setdefault("block_flat", []).append(i)

    witness_ok = 1 <= D.m_witness <= D.A0.length
    if witness_ok:
        target = subsums_exact(D.A0, D.m_witness)
        for w in AffineFlat(D.H, D.translate_witness).members():
            if not target.contains(w):
                witness_ok = False
                break
    if not witness_ok:
        details["witness"] = (
            f"translate + H not inside {D.m_witness}-fold sums of A0 "
            f"(|A0| = {D.A0.length})"
        )

    return VerificationReport(
        partition_ok, a0_budget_ok, block_size_ok, block_flat_ok, witness_ok, details
    )
