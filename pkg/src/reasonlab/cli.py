"""Command-line entry point: generate, run, curves, verify, trace.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from reasonlab import harness
from reasonlab.harness import DataError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _kv_params(pairs: list[str] | None) -> dict:
    """``key=value`` pairs; values parsed as JSON when possible."""
    out = {}
    for item in pairs or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"expected key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _write_or_print(path: str | None, rows) -> None:
    if path:
        harness.write_jsonl(path, rows)
    else:
        for row in rows:
            sys.stdout.write(harness.dumps(row) + "\n")


def cmd_generate(args) -> int:
    rows = harness.generate_dataset(args.task, _kv_params(args.param), args.count, args.seed)
    _write_or_print(args.out, rows)
    if args.out:
        print(f"wrote {len(rows)} {args.task} instances to {args.out}", file=sys.stderr)
    return EXIT_OK


def _load_config(args) -> harness.ExperimentConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config: {exc}") from exc
    for key in ("task", "mode", "dataset", "seed", "beam_width", "max_depth", "sc_samples", "epsilon", "out"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if args.timing:
        data["timing"] = True
    if args.demos is not None:
        data.setdefault("learner", {})["demos"] = args.demos
    missing = [k for k in ("task", "mode", "dataset") if k not in data]
    if missing:
        raise UsageError(f"missing {', '.join(missing)} (give --config or flags)")
    return harness.ExperimentConfig.from_mapping(data)


def cmd_run(args) -> int:
    config = _load_config(args)
    records, summary = harness.run_experiment(config)
    if config.out:
        harness.write_jsonl(config.out, records)
    print(harness.dumps(summary))
    return EXIT_OK


def cmd_curves(args) -> int:
    from reasonlab.learners import (FULL, EquationFamily, render_curve_table, sample_complexity_experiment,
                                    samples_to_threshold)
    grid = [FULL if g == FULL else int(g) for g in args.grid.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    family = EquationFamily(args.n, args.k)
    records = sample_complexity_experiment(family, ("direct", "cot"), grid, seeds, args.eval)
    rows = [{"schema": harness.SCHEMA, "family": family.name, **r.to_json()} for r in records]
    _write_or_print(args.out, rows)
    table = render_curve_table(records)
    for seed in seeds:
        d = samples_to_threshold(records, "direct", seed, args.threshold)
        c = samples_to_threshold(records, "cot", seed, args.threshold)
        table += f"seed {seed}: samples to {args.threshold:.0%}: direct={d} cot={c}\n"
    if args.table:
        Path(args.table).write_text(table)
    if args.out or args.table:
        sys.stdout.write(table)
    return EXIT_OK


def cmd_verify(args) -> int:
    rows = harness.load_jsonl(args.dataset)
    bad = [row["id"] for row in rows if not harness.check_line(row)]
    problems = [f"instance {i}: embedded answer fails its independent check" for i in bad]
    if args.records:
        records = harness.load_jsonl(args.records)
        task = rows[0]["task"] if rows else None
        problems += harness.revalidate_records(task, rows, records)
    for p in problems:
        print(p, file=sys.stderr)
    print(f"checked {len(rows)} instances: {len(problems)} problem(s)")
    return EXIT_DATA if problems else EXIT_OK


def cmd_trace(args) -> int:
    from reasonlab.tasks import blocksworld as bw
    from reasonlab.tasks import equations as eqs
    from reasonlab.tasks import game24 as g24
    from reasonlab.tasks import mwis, qa, routes

    if args.dataset is not None:
        rows = {r["id"]: r for r in harness.load_jsonl(args.dataset)}
        if args.id not in rows:
            raise DataError(f"no instance with id {args.id}")
        task, inst = rows[args.id]["task"], rows[args.id]["instance"]
    else:
        task = args.task
        try:
            inst = json.loads(args.instance) if args.instance else None
        except json.JSONDecodeError as exc:
            raise UsageError(f"--instance must be JSON: {exc}") from exc
        if inst is None:
            raise UsageError("give --dataset/--id or --task/--instance")
    try:
        if task == "mwis":
            text = mwis.emit_mwis_trace(mwis.MwisInstance(tuple(inst["input"])), args.style)
        elif task == "routes":
            g = routes.graph_from_json(inst["graph"])
            text = routes.emit_tot_linear_trace(g, inst["from"], inst["to"]).text
        elif task == "game24":
            sol = g24.brute_force_solve(inst["numbers"], inst.get("target", 24))
            if sol is None:
                text = "Answer: None\n"
            else:
                state, lines = g24.G24State(tuple(inst["numbers"])), []
                for action in sol.steps:
                    lines.append(g24.render_step(state, action))
                    state = g24.apply_g24(state, action)
                text = "\n".join(lines) + f"\nAnswer: {sol.expression} = 24\n"
        elif task == "equations":
            text = eqs.cot_trace(eqs.EquationSystem.from_json(inst))
        elif task == "blocksworld":
            text = bw.render_plan(bw.optimal_plan(bw.parse_state(inst["init"]), bw.parse_goal(inst["goal"])))
        elif task == "qa":
            graph = qa.KnowledgeGraph(tuple(tuple(t) for t in inst["triplets"]))
            text = qa.qa_trace(graph, qa.ComposedQuery(tuple(tuple(t) for t in inst["query"]), inst["answer_slot"]))
        else:
            raise UsageError(f"unknown task {task!r}")
    except (KeyError, TypeError) as exc:
        raise DataError(f"bad {task} instance: {exc}") from exc
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reasonlab", description="Oracle solvers, reasoning engine and learners for six planning tasks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a JSONL dataset with oracle answers")
    g.add_argument("--task", required=True, choices=harness.TASKS)
    g.add_argument("--count", type=int, default=100, help="instances to generate (default: 100)")
    g.add_argument("--seed", type=int, default=0, help="generator seed (default: 0)")
    g.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="task parameter, e.g. min_n=4 max_n=6 (mwis), hard=true (game24), blocks=4")
    g.add_argument("--out", help="output path (default: stdout)")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run a reasoning mode over a dataset")
    r.add_argument("--config", help="JSON config file; flags override its fields")
    r.add_argument("--task", choices=harness.TASKS)
    r.add_argument("--mode", choices=harness.MODES)
    r.add_argument("--dataset")
    r.add_argument("--seed", type=int)
    r.add_argument("--beam-width", dest="beam_width", type=int, help="ToT beam width (default: 5)")
    r.add_argument("--max-depth", dest="max_depth", type=int, help="rollout depth cap (default: 64)")
    r.add_argument("--sc-samples", dest="sc_samples", type=int, help="CoT-SC rollouts (default: 5)")
    r.add_argument("--epsilon", type=float, help="evaluator flip probability (default: 0)")
    r.add_argument("--demos", type=int, help="demonstrations for tabular learners (default: 50)")
    r.add_argument("--out", help="run-record JSONL path")
    r.add_argument("--timing", action="store_true", help="record wall time (breaks byte-determinism)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("curves", help="sample-complexity curves for Direct vs decomposed learners")
    c.add_argument("--n", type=int, default=4, help="input variables (default: 4)")
    c.add_argument("--k", type=int, default=10, help="value range (default: 10)")
    c.add_argument("--grid", default="0,25,50,100,200,400,800,1600,3200,6400,12800,25600,51200,full")
    c.add_argument("--seeds", default="0,1,2,3,4")
    c.add_argument("--eval", type=int, default=1000, help="evaluation draws per seed (default: 1000)")
    c.add_argument("--threshold", type=float, default=0.9)
    c.add_argument("--out", help="curve JSONL path (default: stdout)")
    c.add_argument("--table", help="also write the plain-text table here")
    c.set_defaults(func=cmd_curves)

    v = sub.add_parser("verify", help="re-check dataset answers and stored run trajectories")
    v.add_argument("--dataset", required=True)
    v.add_argument("--records", help="run-record JSONL to re-validate against the dataset")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("trace", help="print the text trace for one instance")
    t.add_argument("--dataset")
    t.add_argument("--id", type=int, default=0)
    t.add_argument("--task", choices=harness.TASKS)
    t.add_argument("--instance", help="instance JSON, same shape as a dataset line's 'instance'")
    t.add_argument("--style", choices=["explicit", "implicit"], default="explicit", help="MWIS trace style")
    t.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"reasonlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, KeyError) as exc:
        print(f"reasonlab: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # last-resort guard so callers see a distinct code
        print(f"reasonlab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
