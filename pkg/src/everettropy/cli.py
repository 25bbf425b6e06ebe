"""Batch command-line runner.

Exit status: 0 on success, 1 on invalid input, 2 when a computed result
breaks a library invariant (e.g. an entropy decrease beyond tolerance).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .capacity import ChannelExperiment, i_max, run_permutation_code
from .copyability import build_copy_unitary, classify_copyable
from .dynamics import detect_branching
from .errors import EverettropyError, PropertyViolation, ValidationError
from .io import load_operator, operator_to_json, save_operator
from .states import DensityState, Observable, reduced_state, von_neumann_entropy
from .selection import seeded_run
from .szilard import run_szilard
from .tensor_algebra import TOL_ENV_VAR

MONOTONE_TOL = 1e-9

__all__ = ["main", "build_parser"]


def fmt(x: float) -> str:
    """Locale-free decimal, 12 digits after the point, no negative zero."""
    x = float(x)
    if not math.isfinite(x):
        raise PropertyViolation(f"non-finite value {x!r} in output")
    return repr(round(x, 12) + 0.0)


def _clean_json(obj):
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_json(v) for v in obj]
    return obj


def _emit_text(text: str, out: str | None):
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise ValidationError(f"cannot write {out}: {exc.strerror}", field="out") from None
    else:
        sys.stdout.write(text)


def _emit_json(obj, out: str | None):
    _emit_text(json.dumps(_clean_json(obj), indent=2) + "\n", out)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load_state(path) -> DensityState:
    return DensityState(load_operator(path))


def _check_entropy(value: float, what: str):
    if not math.isfinite(value) or value < -MONOTONE_TOL:
        raise PropertyViolation(f"{what} entropy {value!r} is invalid")


# -- subcommands -------------------------------------------------------------

def cmd_szilard(args):
    trace = run_szilard(args.molecules)
    rows = []
    for stage, label, per, total in trace.rows():
        _check_entropy(per, label)
        rows.append([stage, label, fmt(per), fmt(total)])
    if max(abs(g) for g in trace.global_per_molecule) > MONOTONE_TOL:
        raise PropertyViolation("global per-molecule entropy is not zero")
    _emit_text(_csv_text(["stage", "subsystem", "entropy_bits_per_molecule", "entropy_bits_total"], rows), args.out)
    if args.json:
        doc = {
            "molecules": trace.n_molecules,
            "stages": [
                {
                    "stage": t,
                    "global_entropy_bits": trace.global_per_molecule[t],
                    "reduced_states": {
                        label: operator_to_json(trace.reduced(t, [label]).op) for label in trace.per_molecule
                    },
                }
                for t in trace.stages
            ],
        }
        _emit_json(doc, args.json)
    return 0


def _selection_job(job):
    da, db, eps, seed = job
    run = seeded_run(da, db, eps, seed)
    return (seed, run.entropies_before, run.entropies_after, run.global_before, run.global_after,
            run.dephasing_form_matched)


def cmd_selection(args):
    if args.dim_a < 1 or args.dim_b < 1:
        raise ValidationError("dimensions must be positive", field="dim-a/dim-b")
    if args.noise < 0:
        raise ValidationError("must be nonnegative", field="noise")
    if args.seeds < 1:
        raise ValidationError("must be at least 1", field="seeds")
    if args.parallel < 1:
        raise ValidationError("must be at least 1", field="parallel")
    jobs = [(args.dim_a, args.dim_b, args.noise, args.seed + k) for k in range(args.seeds)]
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_selection_job, jobs, chunksize=max(1, len(jobs) // (4 * args.parallel))))
    else:
        results = [_selection_job(j) for j in jobs]

    rows, ledger, violations = [], [], []
    for seed, before, after, g0, g1, matched in results:
        for s in (*before, *after, g0, g1):
            _check_entropy(s, "selection")
        if abs(g1 - g0) > MONOTONE_TOL:
            violations.append(f"seed {seed}: global entropy changed by {g1 - g0:.3e}")
        both = all(matched)
        deltas = [a - b for a, b in zip(after, before)]
        for k, (m, d) in enumerate(zip(matched, deltas), 1):
            if m and d < -MONOTONE_TOL:
                violations.append(f"seed {seed}: S{k} decreased by {-d:.3e} in dephasing form")
        if not both:
            ledger.append({"seed": seed, "delta_S1": deltas[0], "delta_S2": deltas[1],
                           "matched_S1": matched[0], "matched_S2": matched[1]})
        rows.append([seed, fmt(before[0]), fmt(after[0]), fmt(before[1]), fmt(after[1]), fmt(g1),
                     "true" if both else "false"])
    _emit_text(_csv_text(["seed", "S1_before", "S1_after", "S2_before", "S2_after", "global_S",
                          "dephasing_form_matched"], rows), args.out)
    if args.ledger:
        _emit_json({"runs": len(rows), "non_matching": ledger}, args.ledger)
    if violations:
        raise PropertyViolation("; ".join(violations[:3]))
    return 0


def cmd_copy_check(args):
    op = load_operator(args.operator)
    if len(op.layout.subsystems) != 1:
        raise ValidationError("operator must act on a single subsystem", field="layout")
    verdict = classify_copyable(op, hermitian_only=args.hermitian_only)
    doc = verdict.to_json()
    if args.unitary_out and verdict.copyable:
        save_operator(build_copy_unitary(op, record_dim=args.record_dim), args.unitary_out)
    _emit_json(doc, args.out)
    return 0


def cmd_capacity(args):
    if bool(args.state) == bool(args.experiment):
        raise ValidationError("give exactly one of --state or --experiment", field="state/experiment")
    if args.state:
        state = _load_state(args.state)
        s = von_neumann_entropy(state)
        value = i_max(state)
        if value < -MONOTONE_TOL or value > math.log2(state.dim) + MONOTONE_TOL:
            raise PropertyViolation(f"i_max {value!r} outside [0, log2 N]")
        _emit_json({"dim": state.dim, "entropy_bits": s, "i_max_bits": value}, args.out)
        return 0
    try:
        doc = json.loads(Path(args.experiment).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {args.experiment}: {exc.strerror}", field="experiment") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg})", field="experiment") from None
    if not isinstance(doc, dict):
        raise ValidationError("must be an object", field="experiment")
    for key in ("spectrum", "code"):
        if key not in doc:
            raise ValidationError("missing", field=key)
    exp = ChannelExperiment(spectrum=tuple(doc["spectrum"]), code=tuple(tuple(p) for p in doc["code"]),
                            prior=tuple(doc["prior"]) if doc.get("prior") is not None else None)
    result = run_permutation_code(exp)
    if result.mutual_information_bits > result.i_max_bits + MONOTONE_TOL:
        raise PropertyViolation("mutual information exceeds i_max")
    _emit_json(result.to_json(), args.out)
    return 0


def cmd_branches(args):
    u = load_operator(args.unitary)
    obs = Observable.from_operator(load_operator(args.observable))
    perm = detect_branching(u, obs)
    _emit_json({"branching": perm is not None, "permutation": list(perm) if perm is not None else None}, args.out)
    return 0


def cmd_entropy(args):
    state = _load_state(args.state)
    if args.keep:
        state = reduced_state(state, args.keep)
    s = von_neumann_entropy(state)
    _check_entropy(s, "state")
    _emit_json({"labels": list(state.layout.labels), "entropy_bits": s}, args.out)
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors: exit 1, leaving 2 for property violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="everettropy", description="Batch runner for the everettropy scenarios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--tol", type=float, default=None,
                        help=f"operator tolerance (default 1e-10, or ${TOL_ENV_VAR})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("szilard", help="staged qubit/carrier/device gas experiment")
    p.add_argument("--molecules", type=int, default=1)
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.add_argument("--json", help="also write per-stage reduced states as JSON")
    p.set_defaults(func=cmd_szilard)

    p = sub.add_parser("selection", help="seeded noisy selection runs")
    p.add_argument("--dim-a", type=int, default=2)
    p.add_argument("--dim-b", type=int, default=2)
    p.add_argument("--noise", type=float, required=True)
    p.add_argument("--seeds", type=int, required=True, help="number of consecutive seeds")
    p.add_argument("--seed", type=int, required=True, help="first seed")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.add_argument("--ledger", help="JSON list of runs whose marginals are not of dephasing form")
    p.set_defaults(func=cmd_selection)

    p = sub.add_parser("copy-check", help="is an operator copyable?")
    p.add_argument("--operator", required=True)
    p.add_argument("--hermitian-only", action="store_true")
    p.add_argument("--record-dim", type=int, default=None)
    p.add_argument("--unitary-out", help="write the copy unitary here when copyable")
    p.add_argument("--out")
    p.set_defaults(func=cmd_copy_check)

    p = sub.add_parser("capacity", help="i_max of a state, or a permutation-code experiment")
    p.add_argument("--state")
    p.add_argument("--experiment")
    p.add_argument("--out")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("branches", help="does a unitary permute an observable's projectors?")
    p.add_argument("--unitary", required=True)
    p.add_argument("--observable", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_branches)

    p = sub.add_parser("entropy", help="von Neumann entropy of a state or its marginal")
    p.add_argument("--state", required=True)
    p.add_argument("--keep", nargs="+", help="subsystem labels to keep")
    p.add_argument("--out")
    p.set_defaults(func=cmd_entropy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.tol is not None:
        if not args.tol > 0:
            print("error: tol: must be positive", file=sys.stderr)
            return 1
        os.environ[TOL_ENV_VAR] = repr(args.tol)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PropertyViolation as exc:
        print(f"property violation: {exc}", file=sys.stderr)
        return 2
    except EverettropyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
