"""Command-line surface: file formats, report envelopes, exit codes.

Commands wrap the library modules one-to-one and emit either a
human-readable summary or a versioned JSON envelope (--json).  Exit
codes are categorized: 0 success, 2 parse/input, 3 precondition,
4 budget exhausted or inconclusive outcome, 5 internal invariant
failure.  An interrupted search saves its checkpoint before exiting
when --checkpoint is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from .errors import (
    CheckpointError,
    ConstructionError,
    DomainError,
    InputError,
    InternalConsistencyError,
    ParseError,
    PreconditionError,
    ZslabError,
)
from .groups import AffineFlat, GroupSpec, LinearMap, Subspace
from .sequences import ElementSequence
from .sumsets import (
    IndicatorSet,
    is_incomplete,
    is_m_incomplete,
    is_zero_sum_free,
    subsums_all,
    subsums_exact,
)
from .structure import (
    CompletenessWitness,
    Decomposition,
    DecompositionParams,
    Inconclusive,
    decompose,
    verify_decomposition,
)
from .search import davenport_constant, olson_constant
from .extremal import (
    classify_max_zero_sum_free_F_p2,
    grt_config_details,
    olson3_experiment,
)

SCHEMA_VERSION = "1"
DEFAULT_SEED = 20240901

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_BUDGET = 4
EXIT_INTERNAL = 5


# -- sequence file format ----------------------------------------------------


def parse_sequence_file(text: str) -> ElementSequence:
    """Parse the sequence file format: a 'p d' header, then one element
    per line as d coordinates with an optional multiplicity token 'xK';
    '#' starts a comment."""
    spec: GroupSpec | None = None
    pairs: list[tuple[tuple[int, ...], int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if spec is None:
            if len(tokens) != 2:
                raise ParseError(f"expected header 'p d', got {line!r}", lineno)
            try:
                p, d = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise ParseError(f"non-integer header {line!r}", lineno)
            try:
                spec = GroupSpec(p, d)
            except InputError as exc:
                raise ParseError(str(exc), lineno)
            continue
        mult = 1
        if tokens[-1].startswith("x") and len(tokens) == spec.d + 1:
            try:
                mult = int(tokens[-1][1:])
            except ValueError:
                raise ParseError(f"bad multiplicity token {tokens[-1]!r}", lineno)
            if mult < 1:
                raise ParseError(f"multiplicity must be >= 1, got {mult}", lineno)
            tokens = tokens[:-1]
        if len(tokens) != spec.d:
            raise ParseError(
                f"expected {spec.d} coordinates, got {len(tokens)}", lineno
            )
        try:
            coords = tuple(int(t) for t in tokens)
        except ValueError:
            raise ParseError(f"non-integer coordinate in {line!r}", lineno)
        pairs.append((spec.reduce(coords), mult))
    if spec is None:
        raise ParseError("missing 'p d' header line")
    return ElementSequence.from_pairs(spec, pairs)


def format_sequence_file(seq: ElementSequence) -> str:
    """Canonical writer: sorted by index, multiplicities merged."""
    spec = seq.spec
    lines = [f"{spec.p} {spec.d}"]
    for v, mult in seq.entries:
        coords = " ".join(str(c) for c in v)
        lines.append(coords if mult == 1 else f"{coords} x{mult}")
    return "\n".join(lines) + "\n"


def _load_sequence(path: str) -> ElementSequence:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    return parse_sequence_file(text)


# -- report plumbing ---------------------------------------------------------


def _jsonable(obj):
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, GroupSpec):
        return {"p": obj.p, "d": obj.d}
    if isinstance(obj, ElementSequence):
        return {
            "length": obj.length,
            "terms": [{"coords": list(v), "mult": m} for v, m in obj.entries],
        }
    if isinstance(obj, IndicatorSet):
        return {"cardinality": obj.card, "members": [list(v) for v in obj.members()]}
    if isinstance(obj, Subspace):
        return {"dim": obj.dim, "basis": [list(row) for row in obj.basis]}
    if isinstance(obj, AffineFlat):
        return {
            "dim": obj.dim,
            "basis": [list(row) for row in obj.space.basis],
            "translate": list(obj.translate),
        }
    if isinstance(obj, LinearMap):
        return {"rows": [list(row) for row in obj.rows]}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
        }
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_jsonable(x) for x in items]
    return repr(obj)


def _print_human(value, indent: int = 0) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        for k, v in value.items():
            if isinstance(v, (dict, list)) and v:
                print(f"{pad}{k}:")
                _print_human(v, indent + 1)
            else:
                print(f"{pad}{k}: {_inline(v)}")
    elif isinstance(value, list):
        for item in value:
            if isinstance(item, (dict, list)):
                print(f"{pad}-")
                _print_human(item, indent + 1)
            else:
                print(f"{pad}- {_inline(item)}")
    else:
        print(f"{pad}{_inline(value)}")


def _inline(value) -> str:
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return str(value)


_STATUS_CODES = {
    "ok": EXIT_OK,
    "partial": EXIT_BUDGET,
    "inconclusive": EXIT_BUDGET,
    "error": EXIT_INTERNAL,
}


def _error_category(exc: Exception) -> tuple[str, int]:
    if isinstance(exc, (ParseError, CheckpointError, InputError)):
        return "parse", EXIT_PARSE
    if isinstance(exc, (PreconditionError, DomainError, ConstructionError)):
        return "precondition", EXIT_PRECONDITION
    return "internal", EXIT_INTERNAL


class _Outcome:
    """What a command handler hands back to the dispatcher."""

    def __init__(self, spec, parameters, result, status="ok", exact=None, nodes=None):
        self.spec = spec
        self.parameters = parameters
        self.result = result
        self.status = status
        self.exact = exact
        self.nodes = nodes


def _emit(command: str, outcome: _Outcome, args, seconds: float, error=None) -> int:
    envelope = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "spec": _jsonable(outcome.spec),
        "parameters": _jsonable(outcome.parameters),
        "result": _jsonable(outcome.result),
        "status": outcome.status,
        "exact_verification": outcome.exact,
        "timing": {"seconds": round(seconds, 6)},
        "nodes": outcome.nodes,
    }
    if error is not None:
        envelope["error"] = error
    if args.json:
        print(json.dumps(envelope, sort_keys=True, indent=2))
    else:
        print(f"command: {command}")
        print(f"status: {outcome.status}")
        if error is not None:
            print(f"error: [{error['category']}] {error['message']}")
        if outcome.result is not None:
            _print_human(_jsonable(outcome.result))
        if outcome.exact is not None:
            print(f"exact verification: {outcome.exact}")
        if outcome.nodes is not None:
            print(f"nodes explored: {outcome.nodes}")
        print(f"elapsed: {seconds:.3f}s")
    return _STATUS_CODES[outcome.status]


# -- command handlers --------------------------------------------------------


def _cmd_sumset(args) -> _Outcome:
    seq = _load_sequence(args.file)
    if not seq:
        raise InputError("empty sequence")
    if args.exact_m is not None:
        result_set = subsums_exact(seq, args.exact_m)
        kind = "exact-m"
    else:
        result_set = subsums_all(seq)
        kind = "all"
    spec = seq.spec
    if args.out == "indices":
        listing = sorted(result_set.indices())
    else:
        listing = [list(v) for v in result_set.members()]
    return _Outcome(
        spec=spec,
        parameters={"file": args.file, "exact_m": args.exact_m, "out": args.out},
        result={
            "kind": kind,
            "input_length": seq.length,
            "cardinality": result_set.card,
            "complete": result_set.is_full(),
            "elements": listing,
        },
        exact=True,
    )


def _cmd_check(args) -> _Outcome:
    seq = _load_sequence(args.file)
    result = {
        "length": seq.length,
        "zero_sum_free": is_zero_sum_free(seq),
        "incomplete": is_incomplete(seq),
    }
    if args.m is not None:
        result["m"] = args.m
        result["m_incomplete"] = is_m_incomplete(seq, args.m)
    return _Outcome(
        spec=seq.spec,
        parameters={"file": args.file, "m": args.m},
        result=result,
        exact=True,
    )


def _cmd_decompose(args) -> _Outcome:
    seq = _load_sequence(args.file)
    defaults = DecompositionParams()
    params = DecompositionParams(
        alpha=args.alpha if args.alpha is not None else defaults.alpha,
        beta=args.beta if args.beta is not None else defaults.beta,
        delta=args.delta if args.delta is not None else defaults.delta,
        w=args.W if args.W is not None else defaults.w,
        epsilon=args.epsilon,
    )
    shown = {
        "file": args.file,
        "alpha": params.alpha,
        "beta": params.beta,
        "delta": params.delta,
        "W": params.w,
        "epsilon": params.epsilon,
        "norm_cutoff": args.norm_cutoff,
    }
    outcome = decompose(seq, params, norm_cutoff=args.norm_cutoff)
    if isinstance(outcome, CompletenessWitness):
        m = outcome.m
        verified = (
            subsums_all(seq).is_full()
            if m is None
            else subsums_exact(seq, m).is_full()
        )
        if not verified:
            raise InternalConsistencyError("completeness witness failed re-verification")
        return _Outcome(
            spec=seq.spec,
            parameters=shown,
            result={"outcome": "complete", "m": m},
            exact=True,
        )
    if isinstance(outcome, Inconclusive):
        return _Outcome(
            spec=seq.spec,
            parameters=shown,
            result={
                "outcome": "inconclusive",
                "stage": outcome.stage,
                "message": outcome.message,
                "diagnostics": outcome.diagnostics,
            },
            status="inconclusive",
            exact=False,
        )
    assert isinstance(outcome, Decomposition)
    report = verify_decomposition(seq, outcome, params)
    if not report.passed:
        raise InternalConsistencyError(f"decomposition failed re-verification: {report}")
    return _Outcome(
        spec=seq.spec,
        parameters=shown,
        result={
            "outcome": "decomposition",
            "remainder": outcome.A0,
            "block_count": len(outcome.blocks),
            "block_size": outcome.block_size,
            "blocks": list(outcome.blocks),
            "direction": outcome.H,
            "m": outcome.m_witness,
            "translate": list(outcome.translate_witness),
            "epsilon_used": outcome.epsilon_used,
            "verification": report,
        },
        exact=True,
    )


def _search_parameters(args) -> dict:
    return {
        "p": args.p,
        "d": args.d,
        "budget": args.budget,
        "checkpoint": args.checkpoint,
        "resume": args.resume,
        "threads": args.threads,
        "symmetry": args.symmetry,
    }


def _search_kwargs(args) -> dict:
    symmetry = {"auto": None, "on": True, "off": False}[args.symmetry]
    return dict(
        budget=args.budget,
        symmetry=symmetry,
        workers=args.threads,
        checkpoint_path=args.checkpoint,
        checkpoint_every=args.checkpoint_every,
        resume=args.resume,
    )


def _cmd_olson(args) -> _Outcome:
    spec = GroupSpec(args.p, args.d)
    report = olson_constant(spec, **_search_kwargs(args))
    return _Outcome(
        spec=spec,
        parameters=_search_parameters(args),
        result=report,
        status="ok" if report.exact else "partial",
        exact=report.exact,
        nodes=report.nodes_explored,
    )


def _cmd_davenport(args) -> _Outcome:
    spec = GroupSpec(args.p, args.d)
    report = davenport_constant(spec, **_search_kwargs(args))
    return _Outcome(
        spec=spec,
        parameters=_search_parameters(args),
        result=report,
        status="ok" if report.exact else "partial",
        exact=report.exact,
        nodes=report.nodes_explored,
    )


def _cmd_extremal(args) -> _Outcome:
    if args.mode == "construct":
        details = grt_config_details(args.p, args.variant, args.ol_p)
        return _Outcome(
            spec=GroupSpec(args.p, 2),
            parameters={"mode": "construct", "p": args.p, "variant": args.variant,
                        "ol_p": args.ol_p},
            result=details,
            exact=True,
        )
    if args.mode == "classify":
        report = classify_max_zero_sum_free_F_p2(args.p, args.budget)
        return _Outcome(
            spec=GroupSpec(args.p, 2),
            parameters={"mode": "classify", "p": args.p, "budget": args.budget},
            result=report,
            status="ok" if report.exact else "partial",
            exact=report.exact,
        )
    assert args.mode == "olson3"
    report = olson3_experiment(args.p, args.gamma, args.budget)
    return _Outcome(
        spec=GroupSpec(args.p, 3),
        parameters={"mode": "olson3", "p": args.p, "gamma": args.gamma,
                    "budget": args.budget},
        result=report,
        status="ok" if report.exact else "partial",
        exact=report.exact,
        nodes=report.nodes_explored,
    )


# -- argument parsing --------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zslab",
        description="Exact zero-sum and subsequence-sum computations "
        "over prime-power vector groups.",
    )
    parser.add_argument("--json", action="store_true", help="emit a JSON report envelope")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="seed for any randomized choices (reproducibility)")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sumset", help="all subsequence sums, or sums of exactly m terms")
    ps.add_argument("file", help="sequence file")
    ps.add_argument("--exact-m", type=int, default=None, metavar="M",
                    help="restrict to sums of exactly M terms")
    ps.add_argument("--out", choices=("coords", "indices"), default="coords",
                    help="element listing format")
    ps.set_defaults(handler=_cmd_sumset)

    pc = sub.add_parser("check", help="zero-sum-free / incomplete predicates")
    pc.add_argument("file", help="sequence file")
    pc.add_argument("--m", type=int, default=None, help="also check m-incompleteness")
    pc.set_defaults(handler=_cmd_check)

    pd = sub.add_parser("decompose", help="block decomposition or completeness witness")
    pd.add_argument("file", help="sequence file")
    pd.add_argument("--alpha", type=float, default=None, help="remainder budget fraction")
    pd.add_argument("--beta", type=float, default=None, help="witness sum-length fraction")
    pd.add_argument("--delta", type=float, default=None, help="minimum density fraction")
    pd.add_argument("--epsilon", type=float, default=None, help="block size fraction")
    pd.add_argument("--W", type=float, default=None, help="growth width parameter")
    pd.add_argument("--norm-cutoff", type=float, default=None,
                    help="norm threshold for discarding line elements")
    pd.set_defaults(handler=_cmd_decompose)

    for name, handler, help_text in (
        ("olson", _cmd_olson, "largest zero-sum-free set size + 1 (exact search)"),
        ("davenport", _cmd_davenport, "longest zero-sum-free sequence length + 1"),
    ):
        px = sub.add_parser(name, help=help_text)
        px.add_argument("--p", type=int, required=True, help="prime modulus")
        px.add_argument("--d", type=int, default=1, help="dimension")
        px.add_argument("--budget", type=int, default=None, help="node budget")
        px.add_argument("--checkpoint", default=None, help="checkpoint file path")
        px.add_argument("--resume", default=None, help="resume from checkpoint file")
        px.add_argument("--checkpoint-every", type=int, default=1 << 20,
                        help="checkpoint cadence in nodes")
        px.add_argument("--threads", type=int, default=1, help="worker count")
        px.add_argument("--symmetry", choices=("auto", "on", "off"), default="auto",
                        help="fix the first element to a canonical representative")
        px.set_defaults(handler=handler)

    pe = sub.add_parser("extremal", help="constructions, classification, rank-3 probe")
    pe.add_argument("mode", choices=("construct", "classify", "olson3"))
    pe.add_argument("--p", type=int, required=True, help="prime modulus")
    pe.add_argument("--variant", type=int, choices=(1, 2), default=1,
                    help="construct: which optimal shape")
    pe.add_argument("--ol-p", type=int, default=None, dest="ol_p",
                    help="construct: known Olson constant of the line (checked)")
    pe.add_argument("--gamma", type=float, default=1.0, help="olson3: cap multiplier")
    pe.add_argument("--budget", type=int, default=None, help="node budget")
    pe.set_defaults(handler=_cmd_extremal)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        outcome = args.handler(args)
    except KeyboardInterrupt:
        note = "interrupted"
        checkpoint = getattr(args, "checkpoint", None)
        if checkpoint:
            note = f"interrupted; checkpoint saved to {checkpoint}"
        outcome = _Outcome(spec=None, parameters={}, result=None, status="partial")
        return _emit(
            args.command, outcome, args, time.perf_counter() - start,
            error={"category": "budget", "message": note},
        )
    except ZslabError as exc:
        category, code = _error_category(exc)
        outcome = _Outcome(spec=None, parameters={}, result=None, status="error")
        _emit(
            args.command, outcome, args, time.perf_counter() - start,
            error={"category": category, "message": str(exc)},
        )
        return code
    return _emit(args.command, outcome, args, time.perf_counter() - start)


if __name__ == "__main__":
    sys.exit(main())
