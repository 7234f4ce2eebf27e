"""Dataset generation, batch runs and record re-validation behind the CLI.

Every dataset line is a JSON object::

    {"schema": "reasonlab/1", "task": "mwis", "id": 0, "params": {...},
     "instance": {...}, "answer": ...}

Run records and curve records carry the same ``schema`` tag.  All output is
serialized with sorted keys so identical inputs give identical bytes.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

from reasonlab.core import Environment, FailureKind, Verdict, replay, validate_trajectory
from reasonlab.engine import (ABSTAIN, NoisyFinalStepModel, NoisyOracleEvaluator, OracleModel, SearchConfig,
                              classify_errors, is_abstain, run_cot, run_cot_sc, run_direct, run_tot)
from reasonlab.learners import DecomposedTrainer, train_tabular
from reasonlab.tasks import blocksworld as bw
from reasonlab.tasks import equations as eqs
from reasonlab.tasks import game24 as g24
from reasonlab.tasks import mwis
from reasonlab.tasks import qa
from reasonlab.tasks import routes

SCHEMA = "reasonlab/1"
TASKS = ("mwis", "game24", "equations", "routes", "blocksworld", "qa")
MODES = ("oracle", "direct", "cot", "cot-sc", "tot", "tot-decomp")


class DataError(ValueError):
    """Malformed dataset, config or record; the CLI maps it to exit code 2."""


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def config_hash(config: Mapping) -> str:
    return hashlib.sha256(dumps(config).encode()).hexdigest()[:16]


# -- per-task codecs ------------------------------------------------------

def _mwis_generate(rng, params):
    lo, hi = params.get("min_n", 4), params.get("max_n", 6)
    lim = params.get("max_abs", 100)
    n = rng.randint(lo, hi)
    arr = [rng.randint(-lim, lim) for _ in range(n)]
    return {"input": arr}


def _game24_generate(rng, params):
    lo, hi = params.get("min_value", 1), params.get("max_value", 13)
    n = params.get("n", 4)
    while True:
        nums = sorted(rng.randint(lo, hi) for _ in range(n))
        if params.get("hard") and g24.count_solutions(nums) != 1:
            continue
        if (params.get("solvable") or params.get("hard")) and not g24.is_solvable(nums):
            continue
        return {"numbers": nums, "target": 24}


def random_graph(rng: random.Random, n: int, degree: float = 2.5, directed: bool = False) -> routes.FlightGraph:
    names = [f"City {i:02d}" for i in range(n)]
    p = min(1.0, degree / max(1, n - 1))
    edges = [(a, b) for a, b in itertools.permutations(names, 2) if (directed or a < b) and rng.random() < p]
    return routes.FlightGraph.from_edges(names, edges, directed)


def _routes_generate(rng, params):
    for _ in range(1000):
        g = random_graph(rng, params.get("cities", 12), params.get("degree", 2.5), params.get("directed", False))
        a, b = rng.sample(sorted(g.cities), 2)
        if not params.get("solvable", True) or routes.bfs_route(g, a, b) is not None:
            return {"graph": g.to_json(), "from": a, "to": b}
    raise DataError("could not draw a connected query")


def random_bw_state(rng: random.Random, blocks: Sequence[str]) -> bw.BwState:
    order = list(blocks)
    rng.shuffle(order)
    stacks, cur = [], [order[0]]
    for b in order[1:]:
        if rng.random() < 0.5:
            stacks.append(tuple(cur))
            cur = [b]
        else:
            cur.append(b)
    stacks.append(tuple(cur))
    return bw.BwState(tuple(stacks))


def _bw_generate(rng, params):
    k = params.get("blocks", 4)
    blocks = list(bw.BLOCK_ORDER[:k])
    init = random_bw_state(rng, blocks)
    while True:
        target = random_bw_state(rng, blocks)
        pairs = [(x, y) for x, y in target.below().items() if y is not None]
        if pairs:
            break
    rng.shuffle(pairs)
    goal = bw.GoalConstraints(tuple(sorted(pairs[: rng.randint(1, min(3, len(pairs)))])))
    return {"init": init.render(), "goal": goal.render()}


def _equations_generate(rng, params):
    system, answer = eqs.generate_equation_task(params.get("n", 5), params.get("k", 100),
                                                params.get("rule_mix"), rng.randrange(2 ** 31))
    return system.to_json(answer)


def _qa_generate(rng, params):
    hops = params.get("hops", 3)
    entities = [f"Entity {i}" for i in range(params.get("entities", 30))]
    relations = [f"relation {i}" for i in range(params.get("relations", 5))]
    chain = rng.sample(entities, hops + 1)
    rels = [rng.choice(relations) for _ in range(hops)]
    triplets = [(chain[i], rels[i], chain[i + 1]) for i in range(hops)]
    keys = {(h, r) for h, r, _ in triplets}
    for _ in range(params.get("distractors", 10)):
        h, t = rng.sample(entities, 2)
        r = rng.choice(relations)
        if (h, r) not in keys:
            keys.add((h, r))
            triplets.append((h, r, t))
    rng.shuffle(triplets)
    slots = [f"?s{i}" for i in range(1, hops + 1)]
    templates = [(chain[0] if i == 0 else slots[i - 1], rels[i], slots[i]) for i in range(hops)]
    return {"triplets": [list(t) for t in triplets], "query": [list(t) for t in templates], "answer_slot": slots[-1]}


GENERATORS: dict[str, Callable[[random.Random, Mapping], dict]] = {
    "mwis": _mwis_generate, "game24": _game24_generate, "routes": _routes_generate,
    "blocksworld": _bw_generate, "equations": _equations_generate, "qa": _qa_generate,
}


def make_env(task: str, instance: Mapping) -> Environment:
    try:
        if task == "mwis":
            return mwis.MwisEnv(mwis.MwisInstance(tuple(instance["input"])))
        if task == "game24":
            return g24.Game24Env(instance["numbers"], instance.get("target", 24))
        if task == "equations":
            return eqs.EquationEnv(eqs.EquationSystem.from_json(instance))
        if task == "routes":
            return routes.RouteEnv(routes.graph_from_json(instance["graph"]), instance["from"], instance["to"])
        if task == "blocksworld":
            return bw.BlocksworldEnv(bw.parse_state(instance["init"]), bw.parse_goal(instance["goal"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad {task} instance: {exc}") from exc
    raise DataError(f"task {task!r} has no planning environment")


def demonstrate(task: str, env: Environment) -> list | None:
    """Oracle action sequence reaching the goal, or None if unsolvable."""
    if task == "mwis":
        actions, state = [], env.initial_state
        while not env.goal(state):
            (a,) = env.actions(state)
            actions.append(a)
            state = env.transition(state, a)
        return actions
    if task == "game24":
        sol = g24.brute_force_solve(env.numbers, env.target)
        return None if sol is None else list(sol.steps)
    if task == "equations":
        return eqs.forward_chain_solve(env.system)[1]
    if task == "routes":
        route = routes.bfs_route(env.graph, env.start, env.goal_city)
        return None if route is None else route[1:]
    if task == "blocksworld":
        return bw.optimal_plan(env.init, env.goal_spec)
    raise DataError(f"no oracle demonstrations for {task}")


def oracle_answer(task: str, instance: Mapping) -> Any:
    if task == "qa":
        graph = qa.KnowledgeGraph(tuple(tuple(t) for t in instance["triplets"]))
        query = qa.ComposedQuery(tuple(tuple(t) for t in instance["query"]), instance["answer_slot"])
        return qa.qa_solve(graph, query)[0]
    env = make_env(task, instance)
    if task == "mwis":
        return mwis.mwis_dp_solve(env.inst).render()
    if task == "game24":
        sol = g24.brute_force_solve(env.numbers, env.target)
        return None if sol is None else sol.expression
    if task == "equations":
        return eqs.fmt_value(eqs.substitution_oracle(env.system))
    if task == "routes":
        route = routes.bfs_route(env.graph, env.start, env.goal_city)
        return "None" if route is None else "-".join(route)
    if task == "blocksworld":
        return bw.render_plan(bw.optimal_plan(env.init, env.goal_spec))
    raise DataError(f"unknown task {task!r}")


def check_line(line: Mapping) -> bool:
    """Independent re-check of a dataset line's embedded answer."""
    task, inst, ans = line["task"], line["instance"], line["answer"]
    if task == "mwis":
        return ans == mwis.mwis_brute_force(mwis.MwisInstance(tuple(inst["input"]))).render()
    if task == "game24":
        if ans is None:
            return not g24.is_solvable(inst["numbers"], inst.get("target", 24))
        return g24.verify_expression(inst["numbers"], ans, inst.get("target", 24))
    if task == "equations":
        system = eqs.EquationSystem.from_json(inst)
        return ans == eqs.fmt_value(eqs.forward_chain_solve(system)[0])
    if task == "routes":
        g = routes.graph_from_json(inst["graph"])
        if ans == "None":
            return routes.bfs_route(g, inst["from"], inst["to"]) is None
        route = routes.parse_route(ans)
        dist = routes.hop_distances(g, inst["to"]).get(inst["from"])
        return routes.is_valid_route(g, route, inst["from"], inst["to"]) and len(route) - 1 == dist
    if task == "blocksworld":
        return make_env(task, inst).verify_answer(ans)
    if task == "qa":
        return ans == oracle_answer(task, inst)
    return False


def generate_dataset(task: str, params: Mapping, count: int, seed: int) -> list[dict]:
    if task not in GENERATORS:
        raise DataError(f"unknown task {task!r}; choose from {', '.join(TASKS)}")
    if count < 0:
        raise DataError("count must be non-negative")
    rng = random.Random(f"{task}:{seed}")
    out = []
    for i in range(count):
        inst = GENERATORS[task](rng, params)
        out.append({"schema": SCHEMA, "task": task, "id": i, "params": dict(params),
                    "instance": inst, "answer": oracle_answer(task, inst)})
    return out


def load_jsonl(path) -> list[dict]:
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                row = json.loads(line)
                if not isinstance(row, dict) or row.get("schema") != SCHEMA:
                    raise DataError(f"{path}:{n}: missing or unknown schema tag")
                rows.append(row)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return rows


def write_jsonl(path, rows: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps(row) + "\n")


# -- runs -----------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    mode: str
    dataset: str
    seed: int = 0
    beam_width: int = 5
    max_depth: int = 64
    sc_samples: int = 5
    epsilon: float = 0.0
    learner: Mapping = field(default_factory=dict)
    out: str | None = None
    timing: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")
        if self.mode not in MODES:
            raise DataError(f"unknown mode {self.mode!r}")
        if self.task == "qa" and self.mode != "oracle":
            raise DataError("qa supports only the oracle mode")
        kind = self.learner.get("kind", "tabular")
        if kind not in ("tabular", "oracle"):
            raise DataError(f"unknown learner kind {kind!r}")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "ExperimentConfig":
        try:
            return cls(**data)
        except TypeError as exc:
            raise DataError(f"bad config: {exc}") from exc

    def to_json(self) -> dict:
        return {"task": self.task, "mode": self.mode, "dataset": self.dataset, "seed": self.seed,
                "beam_width": self.beam_width, "max_depth": self.max_depth, "sc_samples": self.sc_samples,
                "epsilon": self.epsilon, "learner": dict(self.learner), "out": self.out, "timing": self.timing}

    def search(self) -> SearchConfig:
        return SearchConfig(self.beam_width, self.max_depth, self.sc_samples, self.seed)


def decomposed_proposer(task: str):
    if task == "game24":
        def propose(env, state):
            if len(state.numbers) < 2:
                return []
            acts = [a for _, group in g24.propose_actions_decomposed(state) for a in group]
            return g24._dedup_sorted(acts)
        return propose
    if task == "blocksworld":
        return lambda env, state: [a for a, _ in bw.applicable_with_reasons(state)]
    return None


def _train(config: ExperimentConfig, params: Mapping):
    """Tabular learners trained on oracle demonstrations from the dataset's generator."""
    learner_cfg = config.learner
    demos = generate_dataset(config.task, learner_cfg.get("params", params), learner_cfg.get("demos", 50),
                             learner_cfg.get("seed", config.seed + 1000))
    direct_examples, trainer = [], DecomposedTrainer(on_conflict=learner_cfg.get("on_conflict", "first"))
    for row in demos:
        env = make_env(config.task, row["instance"])
        if row["answer"] is None:
            continue
        direct_examples.append((env.problem_key(), row["answer"]))
        trainer.add(env, demonstrate(config.task, env))
    return train_tabular(direct_examples, on_conflict="first"), trainer.build()


def _record_steps(env, traj) -> list[dict]:
    out = []
    for step in traj.steps:
        try:
            state = env.canonical(step.next_state)
        except Exception:  # a mangled predicted state still gets recorded
            state = repr(step.next_state)
        out.append({"action": env.action_key(step.action), "state": state})
    return out


def validate_record_steps(env: Environment, steps: Sequence[Mapping], complete: bool) -> Verdict:
    """Replay stored (action key, canonical state) pairs against the true transition."""
    state = env.initial_state
    for i, step in enumerate(steps):
        actions = {env.action_key(a): a for a in env.actions(state)}
        if step["action"] not in actions:
            return Verdict(False, i, FailureKind.BAD_ACTION)
        nxt = env.transition(state, actions[step["action"]])
        if env.canonical(nxt) != step["state"]:
            return Verdict(False, i, FailureKind.BAD_TRANSITION)
        state = nxt
    if complete and not env.goal(state):
        return Verdict(False, len(steps), FailureKind.GOAL_UNSATISFIED)
    return Verdict.ok()


def _verdict_json(v: Verdict) -> dict:
    return {"valid": v.valid, "failure_index": v.failure_index,
            "failure_kind": v.failure_kind.value if v.failure_kind else None}


def run_one(config: ExperimentConfig, row: Mapping, models) -> dict:
    task, inst = config.task, row["instance"]
    record = {"schema": SCHEMA, "config_hash": config_hash(config.to_json()), "id": row["id"]}
    start = time.perf_counter()
    if task == "qa":
        answer = oracle_answer(task, inst)
        record.update(outcome="correct" if answer == row["answer"] else "incorrect", answer=answer,
                      errors=[], status="goal", trajectory=[], complete=True,
                      verdict=_verdict_json(Verdict.ok()))
        return record
    env = make_env(task, inst)
    search = config.search()
    traj = None
    status = "goal"
    if config.mode == "oracle":
        actions = demonstrate(task, env)
        if actions is None:
            answer = ABSTAIN
            status = "unsolvable"
        else:
            traj = replay(env, actions)
            answer = traj.answer
    elif config.mode == "direct":
        answer = run_direct(models[0], env)
        status = "abstain" if is_abstain(answer) else "goal"
    elif config.mode in ("cot", "cot-sc"):
        model = models[1]
        if config.mode == "cot":
            res = run_cot(model, env, search)
            traj, answer, status = res.trajectory, res.answer, res.status.value
        else:
            answer = run_cot_sc(model, env, search)
            status = "abstain" if is_abstain(answer) else "goal"
    else:
        proposer = decomposed_proposer(task) if config.mode == "tot-decomp" else None
        res = run_tot(OracleModel(proposer), NoisyOracleEvaluator(config.epsilon, config.seed), env, search)
        traj, answer, status = res.trajectory, res.answer, res.status.value
    if is_abstain(answer):
        outcome, answer = "abstain", None
    else:
        outcome = "correct" if env.verify_answer(str(answer)) else "incorrect"
    record.update(outcome=outcome, answer=answer, status=status)
    if traj is not None:
        record["errors"] = [[i, c.value] for i, c in classify_errors(env, traj)]
        record["trajectory"] = _record_steps(env, traj)
        record["complete"] = traj.complete
        record["verdict"] = _verdict_json(validate_trajectory(env, traj))
    else:
        record.update(errors=[], trajectory=[], complete=False, verdict=None)
    if config.timing:
        record["wall_time"] = round(time.perf_counter() - start, 6)
    return record


def _models_for(config: ExperimentConfig, rows: Sequence[Mapping]):
    if config.mode not in ("direct", "cot", "cot-sc"):
        return None
    if config.learner.get("kind", "tabular") == "oracle":
        model = OracleModel()
        noise = config.learner.get("noise", 0.0)
        if noise:
            model = NoisyFinalStepModel(model, noise)
        answers = {}
        for row in rows:
            env = make_env(config.task, row["instance"])
            answers[env.problem_key()] = row["answer"]
        return train_tabular(answers.items()), model
    return _train(config, rows[0].get("params", {}) if rows else {})


def run_experiment(config: ExperimentConfig) -> tuple[list[dict], dict]:
    rows = load_jsonl(config.dataset)
    for row in rows:
        if row.get("task") != config.task:
            raise DataError(f"dataset line {row.get('id')} is a {row.get('task')} instance, not {config.task}")
    models = _models_for(config, rows)
    records = []
    for row in sorted(rows, key=lambda r: r["id"]):
        try:
            records.append(run_one(config, row, models))
        except Exception as exc:  # one bad instance never aborts the batch
            records.append({"schema": SCHEMA, "config_hash": config_hash(config.to_json()), "id": row["id"],
                            "outcome": "incorrect", "answer": None, "status": "error",
                            "error": f"{type(exc).__name__}: {exc}", "errors": [], "trajectory": [],
                            "complete": False, "verdict": None})
    return records, summarize(config, records)


def summarize(config: ExperimentConfig, records: Sequence[Mapping]) -> dict:
    n = len(records)
    outcomes = Counter(r["outcome"] for r in records)
    hist = Counter(c for r in records for _, c in r.get("errors", []))
    summary = {"schema": SCHEMA, "config_hash": config_hash(config.to_json()), "task": config.task,
               "mode": config.mode, "instances": n,
               "accuracy": outcomes["correct"] / n if n else 0.0,
               "abstain_rate": outcomes["abstain"] / n if n else 0.0,
               "error_histogram": dict(sorted(hist.items()))}
    if config.timing and n:
        summary["mean_wall_time"] = round(sum(r.get("wall_time", 0.0) for r in records) / n, 6)
    return summary


def revalidate_records(task: str, dataset_rows: Sequence[Mapping], records: Sequence[Mapping]) -> list[str]:
    """Re-check every stored trajectory and verdict; returns problems found (empty means all good)."""
    by_id = {row["id"]: row for row in dataset_rows}
    problems = []
    for rec in records:
        if rec.get("verdict") is None:
            continue
        row = by_id.get(rec["id"])
        if row is None:
            problems.append(f"record {rec['id']}: no matching dataset line")
            continue
        env = make_env(task, row["instance"])
        got = _verdict_json(validate_record_steps(env, rec["trajectory"], rec.get("complete", False)))
        stored = dict(rec["verdict"])
        if stored.get("failure_kind") == FailureKind.BAD_ANSWER.value:
            stored = {"valid": True, "failure_index": None, "failure_kind": None}
        if got != stored:
            problems.append(f"record {rec['id']}: stored verdict {stored} but replay gives {got}")
    return problems
