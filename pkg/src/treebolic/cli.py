"""Command line entry point: ``treebolic <subcommand> ...``.

Exit status: 0 on success, 2 when a verification check fails, 3 when an
arithmetic comparison stays undecided at the precision cap, 4 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

from .cantor import (
    bilipschitz_report,
    boundary_functor,
    round_trip_bound_check,
    stability_margin,
    tree_functor,
)
from .criteria import (
    DEFAULT_PRECISION_CAP,
    QIVerdict,
    Verdict,
    decide_bs_embedding,
    decide_embedding_existence,
    decide_quasiisometry,
)
from .heights import LogHeight
from .htspace import coarse_heightify_T, extend_to_T, horocyclic_extension, qi_certificate
from .pebbles import PebbleParams, pebble_sequence
from .trees import (
    BudgetExceeded,
    c1_embedding,
    c2_rough_isometry,
    distortion_report,
    heightify,
    tree_distance,
)

EXIT_OK, EXIT_VIOLATION, EXIT_UNDECIDED, EXIT_BAD_INPUT = 0, 2, 3, 4


class BadInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc


# ---------------------------------------------------------------------------
# pebble


def cmd_pebble(args) -> int:
    try:
        params = PebbleParams.parse(args.p, args.q, args.P, args.Q, args.initial)
    except (ValueError, ZeroDivisionError) as exc:
        raise BadInput(str(exc)) from exc
    if args.n < 0:
        raise BadInput("-n must be non-negative")
    trace = pebble_sequence(params, args.n)
    ev = trace.events
    rows = []
    for n, x in enumerate(trace.values):
        h = ev.height(n)
        row = {
            "n": n,
            "tag": ev.tags[n].value,
            "blue_index": "" if ev.blue_index[n] is None else ev.blue_index[n],
            "red_index": "" if ev.red_index[n] is None else ev.red_index[n],
            "height_float": repr(float(h)),
            "X_n": x,
        }
        if args.exact:
            row["height_exact"] = h.as_power_string()
        rows.append(row)
    if args.format == "json":
        _emit(_dumps({"params": [args.p, args.q, args.P, args.Q], "initial": args.initial,
                      "max": trace.maximum, "rows": rows}), args.output)
        return EXIT_OK
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# decide


def cmd_decide(args) -> int:
    if args.bs:
        if len(args.params) != 2:
            raise BadInput("--bs takes two integers m n")
        m, n = (int(x) for x in args.params)
        if m < 2 or n < 2:
            raise BadInput("Baumslag-Solitar parameters must be >= 2")
        embeds = decide_bs_embedding(m, n)
        _emit(_dumps({"bs": [m, n], "embeds": embeds, "verdict": "Yes" if embeds else "No"}), args.output)
        return EXIT_OK
    p, q, pp, qp = _tuple(args.params)
    if args.qi:
        verdict = decide_quasiisometry(p, q, pp, qp, args.precision_cap)
        _emit(_dumps({"verdict": verdict.value}), args.output)
        return EXIT_UNDECIDED if verdict is QIVerdict.UNDECIDED else EXIT_OK
    decision = decide_embedding_existence(p, q, pp, qp, args.precision_cap)
    _emit(_dumps(decision.to_json()), args.output)
    return EXIT_UNDECIDED if decision.verdict is Verdict.UNDECIDED else EXIT_OK


def _tuple(values):
    if len(values) != 4:
        raise BadInput("expected four parameters p q p' q'")
    try:
        p, q, pp, qp = int(values[0]), Fraction(values[1]), int(values[2]), Fraction(values[3])
    except (ValueError, ZeroDivisionError) as exc:
        raise BadInput(str(exc)) from exc
    if p < 2 or pp < 2 or q <= 1 or qp <= 1:
        raise BadInput("need p, p' >= 2 and q, q' > 1")
    return p, q, pp, qp


# ---------------------------------------------------------------------------
# build-verify and friends


def _construct(params, depth, precision_cap=DEFAULT_PRECISION_CAP):
    decision = decide_embedding_existence(*params, precision_cap)
    if decision.verdict is Verdict.C2:
        return decision, c2_rough_isometry(*params, depth)
    if decision.verdict is Verdict.C1:
        return decision, c1_embedding(*params, depth)
    return decision, None


AUTO_DEPTH_MAX = 8
AUTO_VERTEX_BUDGET = 1500


def auto_depth(p: int) -> int:
    """Deepest truncation (at most 8) whose source tree has at most 1500
    vertices; the pairwise scans are quadratic in this count."""
    depth = 1
    while depth < AUTO_DEPTH_MAX and (p ** (depth + 2) - 1) // (p - 1) <= AUTO_VERTEX_BUDGET:
        depth += 1
    return depth


def _refusal(decision) -> int:
    _emit(_dumps({"refused": True, **decision.to_json()}), None)
    return EXIT_UNDECIDED if decision.verdict is Verdict.UNDECIDED else EXIT_BAD_INPUT


def _exp_at_most(value, bound: LogHeight) -> bool:
    """``value <= e^bound`` for a positive rational ``value``."""
    return LogHeight.of_rational(Fraction(value)) <= bound


def _word_length(f, additive) -> int:
    if f.is_order_preserving():
        return f.source.depth
    return f.source.depth - stability_margin(additive, f.target.lengths[0].exp_rational())


def build_verify(params, depth: int, samples: int, seed: int) -> tuple[dict, dict[str, str]]:
    """Run the whole construction and verification pipeline.

    Returns the summary (with a ``checks`` map of booleans) and the text
    artifacts keyed by file name."""
    decision, f = _construct(params, depth)
    files: dict[str, str] = {}
    checks: dict[str, bool] = {}
    report = distortion_report(f)
    A, B = report.additive_constant, report.height_deviation
    files["tree_map.txt"] = f.serialize()
    files["distortion.json"] = report.dumps()
    if depth > 1:
        _, shallower = _construct(params, depth - 1)
        checks["additive_constant_plateau"] = distortion_report(shallower, False).additive_constant == A

    needed = f.target.level_at_or_above(f.source.height(f.source.depth))
    g = heightify(f, target_depth=needed)
    checks["heightify_height_preserving"] = g.is_height_preserving()
    checks["heightify_within_B"] = all(
        tree_distance(g.target, f.images[w], g.images[w]) <= B for w in f.images
    )

    summary = {"params": [str(x) for x in params], "seed": seed, "depth": depth, **decision.to_json()}
    length = _word_length(f, A)
    if length >= 1:
        word_map = boundary_functor(f, length, additive_constant=A)
        files["word_map.txt"] = word_map.serialize()
        lam = bilipschitz_report(word_map)
        files["bilipschitz.json"] = _dumps(lam.to_json())
        checks["round_trip_exact"] = boundary_functor(tree_functor(word_map), length) == word_map
        checks["lambda_within_exp_3B_plus_A"] = lam.lambda_upper is not None and _exp_at_most(
            lam.lambda_upper, B * 3 + A
        )
        summary["word_length"] = length
    else:
        summary["word_length"] = 0
    g_report = distortion_report(g, surjectivity=False)
    g_length = _word_length(g, g_report.additive_constant)
    if g_length >= 1:
        rt = round_trip_bound_check(g, g_length, boundary_functor(g, g_length, additive_constant=g_report.additive_constant))
        files["round_trip.json"] = _dumps(
            {"B": str(rt["B"]), "worst_slack": str(rt["worst_slack"]), "vertices": rt["vertices"],
             "violations": ["".join(map(str, v)) for v in rt["violations"]]}
        )
        checks["round_trip_bounded"] = not rt["violations"]

    F = coarse_heightify_T(extend_to_T(f), depth)
    cert = qi_certificate(horocyclic_extension(F), samples, domain_depth=max(1, min(depth - 2, 5)), seed=seed)
    files["certificate.json"] = _dumps(cert.to_json())
    checks["treebolic_certificate"] = cert.ok

    summary["A"] = str(A)
    summary["B"] = str(B)
    summary["checks"] = checks
    summary["ok"] = all(checks.values())
    return summary, files


def cmd_build_verify(args) -> int:
    params = _tuple(args.params)
    decision = decide_embedding_existence(*params)
    if not decision.verdict.embeddable:
        return _refusal(decision)
    depth = args.depth if args.depth is not None else auto_depth(params[0])
    summary, files = build_verify(params, depth, args.samples, args.seed)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        (out / "summary.json").write_text(_dumps(summary) + "\n", encoding="utf-8")
    _emit(_dumps(summary), None)
    return EXIT_OK if summary["ok"] else EXIT_VIOLATION


def cmd_boundary(args) -> int:
    params = _tuple(args.params)
    depth = args.depth if args.depth is not None else auto_depth(params[0])
    decision, f = _construct(params, depth)
    if f is None:
        return _refusal(decision)
    A = distortion_report(f, False).additive_constant
    length = args.length if args.length is not None else _word_length(f, A)
    if length < 1:
        raise BadInput(f"depth {depth} leaves no stable word length; increase --depth")
    try:
        g = boundary_functor(f, length, additive_constant=A)
    except ValueError as exc:
        raise BadInput(str(exc)) from exc
    if args.format == "json":
        _emit(_dumps({"word_length": length, "target_length": g.target_length,
                      "table": g.serialize().splitlines(), "bilipschitz": bilipschitz_report(g).to_json()}),
              args.output)
    else:
        _emit(g.serialize(), args.output)
    return EXIT_OK


def cmd_treebolic_check(args) -> int:
    params = _tuple(args.params)
    depth = args.depth if args.depth is not None else auto_depth(params[0])
    decision, f = _construct(params, depth)
    if f is None:
        return _refusal(decision)
    F = coarse_heightify_T(extend_to_T(f), depth)
    domain_depth = args.domain_depth if args.domain_depth is not None else max(1, min(depth - 2, 5))
    cert = qi_certificate(horocyclic_extension(F), args.samples, domain_depth=domain_depth, seed=args.seed)
    _emit(_dumps(cert.to_json()), args.output)
    return EXIT_OK if cert.ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="treebolic", description="Embeddings of regular trees and treebolic spaces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pb = sub.add_parser("pebble", help="pebble sequence trace")
    pb.add_argument("-p", required=True, help="branching sequence, e.g. '6;3'")
    pb.add_argument("-q", required=True, help="edge parameter sequence, e.g. '2;4'")
    pb.add_argument("-P", required=True, help="target branching sequence")
    pb.add_argument("-Q", required=True, help="target edge parameter sequence")
    pb.add_argument("-n", type=_int, default=100, help="number of events after h_0")
    pb.add_argument("--initial", type=_int, default=1)
    pb.add_argument("--exact", action="store_true", help="add a base^coeff height column")
    pb.add_argument("--format", choices=("csv", "json"), default="csv")
    pb.add_argument("-o", "--output")
    pb.set_defaults(func=cmd_pebble)

    dc = sub.add_parser("decide", help="decide embeddability")
    dc.add_argument("params", nargs="+")
    mode = dc.add_mutually_exclusive_group()
    mode.add_argument("--bs", action="store_true", help="Baumslag-Solitar question for m n")
    mode.add_argument("--qi", action="store_true", help="decide quasiisometry instead")
    dc.add_argument("--precision-cap", type=_int, default=DEFAULT_PRECISION_CAP)
    dc.add_argument("-o", "--output")
    dc.set_defaults(func=cmd_decide)

    bv = sub.add_parser("build-verify", help="construct an embedding and verify it")
    bv.add_argument("params", nargs=4)
    bv.add_argument("--depth", type=_int, help="truncation depth (default: automatic, at most 8)")
    bv.add_argument("--samples", type=_int, default=1000)
    bv.add_argument("--seed", type=_int, default=0)
    bv.add_argument("--out", help="directory for the serialized artifacts")
    bv.set_defaults(func=cmd_build_verify)

    bd = sub.add_parser("boundary", help="boundary word map of the constructed embedding")
    bd.add_argument("params", nargs=4)
    bd.add_argument("--depth", type=_int, help="truncation depth (default: automatic, at most 8)")
    bd.add_argument("--length", type=_int)
    bd.add_argument("--format", choices=("text", "json"), default="text")
    bd.add_argument("-o", "--output")
    bd.set_defaults(func=cmd_boundary)

    tc = sub.add_parser("treebolic-check", help="sampled certificate for the treebolic extension")
    tc.add_argument("params", nargs=4)
    tc.add_argument("--depth", type=_int, help="truncation depth (default: automatic, at most 8)")
    tc.add_argument("--domain-depth", type=_int)
    tc.add_argument("--samples", type=_int, default=1000)
    tc.add_argument("--seed", type=_int, default=0)
    tc.add_argument("-o", "--output")
    tc.set_defaults(func=cmd_treebolic_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BadInput, BudgetExceeded) as exc:
        print(f"treebolic: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
