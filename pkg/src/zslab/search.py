"""Pruned exhaustive searches for zero-sum extremal constants.

Two search modes share one depth-first engine over canonical element
indices: subset search (largest zero-sum-free set, hence the Olson
constant) and multiset search (longest zero-sum-free sequence, hence
the Davenport constant).  The engine keeps the running collection of
nonempty subsequence sums as a bitmask, kills any branch whose sums
hit zero, prunes branches that cannot beat the incumbent, counts every
live node it creates, and snapshots its frontier to a versioned text
checkpoint from which a later run resumes bit-exactly.
"""

from __future__ import annotations

import contextlib
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import CheckpointError, InputError, InternalConsistencyError
from .groups import GroupSpec, Vector
from .sequences import ElementSequence
from .sumsets import is_zero_sum_free, translate_index_bits

CHECKPOINT_MAGIC = "ZSLAB-CKPT/1"
DEFAULT_CHECKPOINT_EVERY = 1 << 20

SEARCH_MODES = ("set", "sequence")

# A frontier frame is (chosen index prefix, next candidate index).
Frame = tuple[tuple[int, ...], int]


def eh_bound(m: int, n: int, p: int) -> int:
    """Lower bound min(p, m*n - m^2 + 1) on the number of sums of
    m distinct terms drawn from a set of n field elements."""
    if not 1 <= m <= n:
        raise InputError(f"m must satisfy 1 <= m <= {n}, got {m}")
    return min(p, m * n - m * m + 1)


@dataclass(frozen=True)
class SearchState:
    """Snapshot of a constant search: incumbent, node count, open frontier.

    ``frontier`` lists the unexplored frames bottom-to-top; an empty
    frontier means the search ran to exhaustion and ``best_size`` is
    exact rather than a lower bound.
    """

    spec: GroupSpec
    mode: str
    best_size: int
    witness: ElementSequence
    nodes_explored: int
    frontier: tuple[Frame, ...]
    symmetry: bool

    @property
    def exhausted(self) -> bool:
        return not self.frontier


# -- checkpoint text format ------------------------------------------------


def format_checkpoint(state: SearchState) -> str:
    spec = state.spec
    witness_indices = [spec.encode(v) for v in state.witness.occurrences()]
    lines = [
        CHECKPOINT_MAGIC,
        f"{spec.p} {spec.d} {state.mode}",
        f"symmetry {'on' if state.symmetry else 'off'}",
        f"best {state.best_size}",
        "witness" + "".join(f" {i}" for i in witness_indices),
        f"nodes {state.nodes_explored}",
    ]
    for prefix, nxt in state.frontier:
        lines.append("frame" + "".join(f" {i}" for i in prefix) + f" | {nxt}")
    return "\n".join(lines) + "\n"


def save_checkpoint(state: SearchState, path: str | Path) -> None:
    """Write the checkpoint atomically: a kill mid-write must never
    leave a torn file behind."""
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(format_checkpoint(state))
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _parse_int_line(line: str, lineno: int, key: str) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        raise CheckpointError(f"expected '{key} <integer>', got {line!r}", lineno)
    try:
        value = int(parts[1])
    except ValueError:
        raise CheckpointError(f"{key} value {parts[1]!r} is not an integer", lineno)
    if value < 0:
        raise CheckpointError(f"{key} must be nonnegative, got {value}", lineno)
    return value


def parse_checkpoint(text: str) -> SearchState:
    """Parse checkpoint text, validating both syntax and consistency."""
    lines = text.splitlines()
    if len(lines) < 6:
        raise CheckpointError("truncated checkpoint: fewer than 6 lines")
    if lines[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"expected header {CHECKPOINT_MAGIC!r}, got {lines[0]!r}", 1)

    parts = lines[1].split()
    if len(parts) != 3:
        raise CheckpointError(f"expected 'p d mode', got {lines[1]!r}", 2)
    try:
        p, d = int(parts[0]), int(parts[1])
    except ValueError:
        raise CheckpointError(f"non-integer group parameters in {lines[1]!r}", 2)
    mode = parts[2]
    if mode not in SEARCH_MODES:
        raise CheckpointError(f"unknown search mode {mode!r}", 2)
    try:
        spec = GroupSpec(p, d)
    except InputError as exc:
        raise CheckpointError(str(exc), 2)

    parts = lines[2].split()
    if len(parts) != 2 or parts[0] != "symmetry" or parts[1] not in ("on", "off"):
        raise CheckpointError(f"expected 'symmetry on|off', got {lines[2]!r}", 3)
    symmetry = parts[1] == "on"

    best = _parse_int_line(lines[3], 4, "best")

    parts = lines[4].split()
    if not parts or parts[0] != "witness":
        raise CheckpointError(f"expected 'witness ...', got {lines[4]!r}", 5)
    try:
        witness_indices = tuple(int(t) for t in parts[1:])
    except ValueError:
        raise CheckpointError("non-integer witness index", 5)
    if len(witness_indices) != best:
        raise CheckpointError(
            f"witness has {len(witness_indices)} terms but best is {best}", 5
        )
    for idx in witness_indices:
        if not 1 <= idx < spec.order:
            raise CheckpointError(f"witness index {idx} out of range", 5)

    nodes = _parse_int_line(lines[5], 6, "nodes")

    frontier: list[Frame] = []
    for lineno, line in enumerate(lines[6:], start=7):
        parts = line.split()
        if not parts or parts[0] != "frame" or "|" not in parts:
            raise CheckpointError(f"expected 'frame ... | next', got {line!r}", lineno)
        bar = parts.index("|")
        if bar != len(parts) - 2:
            raise CheckpointError(f"malformed frame line {line!r}", lineno)
        try:
            prefix = tuple(int(t) for t in parts[1:bar])
            nxt = int(parts[-1])
        except ValueError:
            raise CheckpointError(f"non-integer frame entry in {line!r}", lineno)
        if not 1 <= nxt <= spec.order:
            raise CheckpointError(f"frame next index {nxt} out of range", lineno)
        frontier.append((prefix, nxt))

    witness = ElementSequence.from_indices(spec, witness_indices)
    state = SearchState(
        spec=spec,
        mode=mode,
        best_size=best,
        witness=witness,
        nodes_explored=nodes,
        frontier=tuple(frontier),
        symmetry=symmetry,
    )
    # validates frame prefixes: range, ordering, zero-sum-freeness
    _frames_from_frontier(state)
    if best > 0 and not is_zero_sum_free(witness):
        raise CheckpointError("checkpoint witness is not zero-sum-free")
    return state


def load_checkpoint(path: str | Path) -> SearchState:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}")
    return parse_checkpoint(text)


# -- depth-first engine ----------------------------------------------------


def _frames_from_frontier(state: SearchState) -> list[list]:
    """Rebuild live stack frames [prefix, sums, next, filled] from the
    stored (prefix, next) pairs, recomputing each sum bitmask."""
    spec = state.spec
    seq_mode = state.mode == "sequence"
    stack = []
    for prefix, nxt in state.frontier:
        sums = 0
        prev = 0
        for idx in prefix:
            if not 1 <= idx < spec.order:
                raise CheckpointError(f"frame index {idx} out of range")
            if (idx < prev) if seq_mode else (idx <= prev and prev > 0):
                raise CheckpointError(f"frame prefix {prefix} violates canonical order")
            sums = sums | translate_index_bits(spec, sums, spec.decode(idx)) | (1 << idx)
            if sums & 1:
                raise CheckpointError(f"frame prefix {prefix} is not zero-sum-free")
            prev = idx
        stack.append([tuple(prefix), sums, nxt, sums.bit_count()])
    return stack


def _make_state(
    spec: GroupSpec,
    mode: str,
    symmetry: bool,
    best: int,
    witness: tuple[int, ...],
    nodes: int,
    stack: list[list],
) -> SearchState:
    return SearchState(
        spec=spec,
        mode=mode,
        best_size=best,
        witness=ElementSequence.from_indices(spec, witness),
        nodes_explored=nodes,
        frontier=tuple((tuple(f[0]), f[2]) for f in stack),
        symmetry=symmetry,
    )


def _run_dfs(
    spec: GroupSpec,
    mode: str,
    symmetry: bool,
    stack: list[list],
    best: int,
    witness: tuple[int, ...],
    nodes: int,
    *,
    budget: int | None,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
    seed_depth: int | None = None,
    seeds: list[list] | None = None,
) -> tuple[int, tuple[int, ...], int, list[list]]:
    """Core loop.  Mutates ``stack`` and returns (best, witness, nodes,
    remaining stack); a nonempty remainder means the budget ran out.

    Every live child costs one node, counted when its frame is created.
    With ``seed_depth`` set, children reaching that depth are moved to
    ``seeds`` instead of the stack (used to split off subtree tasks).
    """
    order = spec.order
    elements = [spec.decode(i) for i in range(order)]
    seq_mode = mode == "sequence"
    # Zero-sum-freeness survives every invertible linear substitution and
    # those act transitively on nonzero vectors, so some image of any
    # witness has the first nonzero element as its first term.
    root_allowed = 1 if symmetry else None

    try:
        while stack:
            if budget is not None and nodes >= budget:
                break
            frame = stack[-1]
            prefix, sums, nxt, filled = frame
            depth = len(prefix)
            # each appended element adds a new sum, and sums avoid zero,
            # so at most (order - 1) - filled elements can still follow
            room = order - 1 - filled
            if not seq_mode:
                room = min(room, order - nxt)
            if nxt >= order or depth + room <= best:
                stack.pop()
                continue
            frame[2] = nxt + 1
            if depth == 0 and root_allowed is not None and nxt != root_allowed:
                continue
            grown = sums | translate_index_bits(spec, sums, elements[nxt]) | (1 << nxt)
            if grown & 1:
                continue
            nodes += 1
            child = prefix + (nxt,)
            if depth + 1 > best:
                best = depth + 1
                witness = child
            child_frame = [child, grown, nxt if seq_mode else nxt + 1, grown.bit_count()]
            if seed_depth is not None and depth + 1 == seed_depth:
                assert seeds is not None
                seeds.append(child_frame)
            else:
                stack.append(child_frame)
            if checkpoint_path is not None and nodes % checkpoint_every == 0:
                save_checkpoint(
                    _make_state(spec, mode, symmetry, best, witness, nodes, stack),
                    checkpoint_path,
                )
    except KeyboardInterrupt:
        if checkpoint_path is not None:
            save_checkpoint(
                _make_state(spec, mode, symmetry, best, witness, nodes, stack),
                checkpoint_path,
            )
        raise
    return best, witness, nodes, stack


def _witness_indices(state: SearchState) -> tuple[int, ...]:
    spec = state.spec
    return tuple(spec.encode(v) for v in state.witness.occurrences())


def _run_parallel(
    state: SearchState,
    *,
    budget: int | None,
    workers: int,
    split_depth: int,
) -> SearchState:
    """Split the tree at ``split_depth`` into independent subtree tasks.

    Tasks never share their incumbent, so per-task node counts, and
    hence the merged total, do not depend on scheduling.  The price is
    weaker pruning than the sequential engine.
    """
    spec, mode, symmetry = state.spec, state.mode, state.symmetry
    frames = _frames_from_frontier(state)
    shallow = [f for f in frames if len(f[0]) < split_depth]
    seeds = [f for f in frames if len(f[0]) >= split_depth]

    best = state.best_size
    witness = _witness_indices(state)
    nodes = state.nodes_explored
    best, witness, nodes, shallow_rest = _run_dfs(
        spec, mode, symmetry, shallow, best, witness, nodes,
        budget=budget, seed_depth=split_depth, seeds=seeds,
    )
    if shallow_rest:
        # budget died during the split phase; report what is left
        return _make_state(spec, mode, symmetry, best, witness, nodes, shallow_rest + seeds)

    seeds.sort(key=lambda f: f[0])
    if not seeds:
        return _make_state(spec, mode, symmetry, best, witness, nodes, [])

    remaining = None if budget is None else max(budget - nodes, 0)
    quota, extra = (None, 0) if remaining is None else divmod(remaining, len(seeds))

    def task(item: tuple[int, list]) -> tuple[int, tuple[int, ...], int, list[list]]:
        i, seed = item
        slice_budget = None if quota is None else quota + (1 if i < extra else 0)
        return _run_dfs(
            spec, mode, symmetry, [seed], best, witness, 0, budget=slice_budget,
        )

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(task, enumerate(seeds)))

    leftovers: list[list] = []
    for task_best, task_witness, task_nodes, task_stack in results:
        nodes += task_nodes
        if task_best > best or (task_best == best and task_witness < witness):
            best, witness = task_best, task_witness
        leftovers.extend(task_stack)
    return _make_state(spec, mode, symmetry, best, witness, nodes, leftovers)


def run_search(
    spec: GroupSpec | None = None,
    mode: str = "set",
    *,
    budget: int | None = None,
    symmetry: bool | None = None,
    workers: int = 1,
    split_depth: int = 1,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
    resume: SearchState | str | Path | None = None,
) -> SearchState:
    """Run (or resume) a maximum zero-sum-free search to exhaustion or
    until ``budget`` nodes have been explored.

    ``symmetry`` pins the first chosen element to the first nonzero
    index; default on for d == 1, off otherwise.  With ``resume`` the
    group, mode and symmetry flag come from the saved state and a
    sequential re-run continues bit-exactly: identical final best size
    and node count as the uninterrupted run.  ``workers > 1`` explores
    independent subtree tasks with isolated incumbents and merges them
    deterministically (max size, then lexicographically least witness);
    checkpoints written by a parallel run resume sequentially, so node
    totals are only comparable between runs of the same shape.
    """
    if workers < 1:
        raise InputError(f"workers must be >= 1, got {workers}")
    if split_depth < 1:
        raise InputError(f"split_depth must be >= 1, got {split_depth}")
    if checkpoint_every < 1:
        raise InputError(f"checkpoint_every must be >= 1, got {checkpoint_every}")
    if budget is not None and budget < 0:
        raise InputError(f"budget must be nonnegative, got {budget}")

    if resume is not None:
        state = resume if isinstance(resume, SearchState) else load_checkpoint(resume)
        if spec is not None and spec != state.spec:
            raise InputError(
                f"resume checkpoint is for F_{state.spec.p}^{state.spec.d}, "
                f"not F_{spec.p}^{spec.d}"
            )
    else:
        if spec is None:
            raise InputError("spec is required when not resuming")
        if mode not in SEARCH_MODES:
            raise InputError(f"mode must be one of {SEARCH_MODES}, got {mode!r}")
        state = SearchState(
            spec=spec,
            mode=mode,
            best_size=0,
            witness=ElementSequence.empty(spec),
            nodes_explored=0,
            frontier=(((), 1),),
            symmetry=(spec.d == 1) if symmetry is None else bool(symmetry),
        )

    if state.exhausted:
        final = state
    elif workers == 1:
        stack = _frames_from_frontier(state)
        best, witness, nodes, stack = _run_dfs(
            state.spec, state.mode, state.symmetry, stack,
            state.best_size, _witness_indices(state), state.nodes_explored,
            budget=budget,
            checkpoint_path=checkpoint_path,
            checkpoint_every=checkpoint_every,
        )
        final = _make_state(
            state.spec, state.mode, state.symmetry, best, witness, nodes, stack
        )
    else:
        final = _run_parallel(
            state, budget=budget, workers=workers, split_depth=split_depth
        )

    if checkpoint_path is not None:
        save_checkpoint(final, checkpoint_path)
    if final.best_size != final.witness.length or not is_zero_sum_free(final.witness):
        raise InternalConsistencyError("search produced an invalid witness")
    return final


# -- public entry points ---------------------------------------------------


def max_zero_sum_free_set(
    spec: GroupSpec,
    budget: int | None = None,
    *,
    symmetry: bool | None = None,
    workers: int = 1,
    split_depth: int = 1,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
    resume: SearchState | str | Path | None = None,
) -> tuple[int, ElementSequence, bool]:
    """Largest zero-sum-free subset size, a witness, and whether the
    search exhausted the tree (if not, the size is a lower bound)."""
    state = run_search(
        spec,
        "set",
        budget=budget,
        symmetry=symmetry,
        workers=workers,
        split_depth=split_depth,
        checkpoint_path=checkpoint_path,
        checkpoint_every=checkpoint_every,
        resume=resume,
    )
    return state.best_size, state.witness, state.exhausted


def two_sqrt_bound(spec: GroupSpec) -> int:
    """General upper bound 2*sqrt(|G|) on the Olson constant, floored."""
    return math.isqrt(4 * spec.order)


def hamidoune_zemor_bound(p: int) -> int:
    """Reference upper bound ceil(sqrt(2p) + 5 ln p) for the prime line."""
    return math.ceil(math.sqrt(2 * p) + 5 * math.log(p))


@dataclass(frozen=True)
class OlsonReport:
    """Olson constant computation plus the reference comparisons."""

    spec: GroupSpec
    value: int
    exact: bool
    witness: ElementSequence
    nodes_explored: int
    two_sqrt_bound: int
    hamidoune_zemor_bound: int | None
    grt_prediction: int | None
    grt_matches: bool | None


def olson_constant(
    spec: GroupSpec,
    budget: int | None = None,
    *,
    symmetry: bool | None = None,
    workers: int = 1,
    split_depth: int = 1,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
    resume: SearchState | str | Path | None = None,
) -> OlsonReport:
    """Smallest size forcing every subset of that size to have a zero
    subsum.  Exact when the search exhausts; otherwise ``value`` is a
    lower bound and ``exact`` is False.

    For d == 2 the report carries p + OL(F_p) - 1 for comparison; the
    identity is only claimed for large p, so a mismatch at small p is
    reported rather than asserted.  ``nodes_explored`` covers the main
    search only, not the d == 1 side computation.
    """
    state = run_search(
        spec,
        "set",
        budget=budget,
        symmetry=symmetry,
        workers=workers,
        split_depth=split_depth,
        checkpoint_path=checkpoint_path,
        checkpoint_every=checkpoint_every,
        resume=resume,
    )
    value = state.best_size + 1
    exact = state.exhausted

    hz = hamidoune_zemor_bound(spec.p) if spec.d == 1 else None
    grt_prediction = None
    grt_matches = None
    if spec.d == 2:
        line = run_search(GroupSpec(spec.p, 1), "set", budget=budget)
        if line.exhausted:
            grt_prediction = spec.p + (line.best_size + 1) - 1
            if exact:
                grt_matches = value == grt_prediction
    return OlsonReport(
        spec=spec,
        value=value,
        exact=exact,
        witness=state.witness,
        nodes_explored=state.nodes_explored,
        two_sqrt_bound=two_sqrt_bound(spec),
        hamidoune_zemor_bound=hz,
        grt_prediction=grt_prediction,
        grt_matches=grt_matches,
    )


@dataclass(frozen=True)
class DavenportReport:
    """Davenport constant computation against the d(p-1)+1 prediction."""

    spec: GroupSpec
    value: int
    exact: bool
    predicted: int
    matches: bool | None
    witness: ElementSequence
    nodes_explored: int


def davenport_constant(
    spec: GroupSpec,
    budget: int | None = None,
    *,
    symmetry: bool | None = None,
    workers: int = 1,
    split_depth: int = 1,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
    resume: SearchState | str | Path | None = None,
) -> DavenportReport:
    """Smallest length forcing every sequence of that length to have a
    zero subsum, computed as max zero-sum-free length + 1."""
    state = run_search(
        spec,
        "sequence",
        budget=budget,
        symmetry=symmetry,
        workers=workers,
        split_depth=split_depth,
        checkpoint_path=checkpoint_path,
        checkpoint_every=checkpoint_every,
        resume=resume,
    )
    value = state.best_size + 1
    predicted = spec.d * (spec.p - 1) + 1
    return DavenportReport(
        spec=spec,
        value=value,
        exact=state.exhausted,
        predicted=predicted,
        matches=(value == predicted) if state.exhausted else None,
        witness=state.witness,
        nodes_explored=state.nodes_explored,
    )


def enumerate_max_zero_sum_free_sets(
    spec: GroupSpec, size: int, budget: int | None = None
) -> tuple[tuple[tuple[Vector, ...], ...], bool]:
    """All zero-sum-free subsets of exactly the given size, in canonical
    index order, plus an exhaustion flag.  No symmetry reduction: the
    caller gets the complete list."""
    if size < 1:
        raise InputError(f"size must be positive, got {size}")
    if budget is not None and budget < 0:
        raise InputError(f"budget must be nonnegative, got {budget}")
    order = spec.order
    elements = [spec.decode(i) for i in range(order)]
    found: list[tuple[int, ...]] = []
    stack: list[list] = [[(), 0, 1, 0]]
    nodes = 0
    exhausted = True
    while stack:
        if budget is not None and nodes >= budget:
            exhausted = False
            break
        frame = stack[-1]
        prefix, sums, nxt, filled = frame
        depth = len(prefix)
        room = min(order - nxt, order - 1 - filled)
        if nxt >= order or depth + room < size:
            stack.pop()
            continue
        frame[2] = nxt + 1
        grown = sums | translate_index_bits(spec, sums, elements[nxt]) | (1 << nxt)
        if grown & 1:
            continue
        nodes += 1
        child = prefix + (nxt,)
        if depth + 1 == size:
            found.append(child)
        else:
            stack.append([child, grown, nxt + 1, grown.bit_count()])
    sets = tuple(tuple(elements[i] for i in idxs) for idxs in found)
    return sets, exhausted
