"""Acceptance criteria 1-10; each test records one pass/fail line in the terminal summary."""

import random
import time

import numpy as np

from oracles import (check_identities, floyd_warshall, load_fixture, mwis_exhaustive, ordered_stack_lists,
                     solvable_24, strips_distance)
from reasonlab import harness
from reasonlab.core import replay, validate_trajectory
from reasonlab.engine import NoisyFinalStepModel, OracleModel, SearchConfig, run_cot_sc
from reasonlab.learners import (FULL, EquationFamily, OccamBoundInput, occam_bound, sample_complexity_experiment,
                                samples_to_threshold, simulate_occam)
from reasonlab.tasks import blocksworld as bw
from reasonlab.tasks import equations as eqs
from reasonlab.tasks import game24 as g24
from reasonlab.tasks import mwis, routes
from reasonlab.tasks.equations import EquationEnv, modular_chain_family
from test_blocksworld import POOL, random_goal, random_stacks
from test_game24 import WORKED, parse_step
from test_mwis import PROMPT_ANSWERS, _chunks
from test_routes import guatemala_graph, random_sparse_graph


def test_c1_mwis_dp_equals_brute_force(criterion):
    rng = random.Random(1)
    cases = [[rng.randint(-50, 50) for _ in range(rng.randint(4, 12))] for _ in range(1000)]
    start = time.perf_counter()
    mismatches = 0
    for arr in cases:
        inst = mwis.MwisInstance(arr)
        dp, brute = mwis.mwis_dp_solve(inst), mwis.mwis_brute_force(inst)
        mismatches += dp.marks != brute.marks or dp.sum != brute.sum or dp.marks != mwis_exhaustive(arr)[0]
    elapsed = time.perf_counter() - start
    prompts = all(mwis.mwis_dp_solve(mwis.MwisInstance(a)).render() == want for a, want in PROMPT_ANSWERS)
    ok = mismatches == 0 and elapsed < 5 and prompts
    assert criterion(1, ok, f"mwis: 1000 instances, {mismatches} mismatches, {elapsed:.2f}s, prompt answers {prompts}")


def test_c2_equations_forward_chaining(criterion):
    rng = random.Random(2)
    wrong, lengths, ops = 0, [], []
    for i in range(1000):
        system, answer = eqs.generate_equation_task(rng.randint(2, 8), 100, seed=rng.randrange(2 ** 31))
        trace = eqs.forward_chain(system)
        value, _ = eqs.forward_chain_solve(system)
        wrong += not (value == answer == eqs.substitution_oracle(system))
        lengths.append(system.total_length)
        ops.append(trace.ops)
    x, y = np.array(lengths, float), np.array(ops, float)
    fit = np.polyval(np.polyfit(x, y, 1), x)
    r2 = 1 - ((y - fit) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    ok = wrong == 0 and r2 >= 0.99
    assert criterion(2, ok, f"equations: 1000 systems, {wrong} wrong, ops-vs-length R^2 {r2:.4f}")


def test_c3_game24(criterion):
    worked = 0
    for numbers, lines, expr in WORKED:
        state, actions = g24.G24State(tuple(numbers)), []
        for line in lines:
            action = parse_step(line)
            assert g24.render_step(state, action) == line
            state = g24.apply_g24(state, action)
            actions.append(action)
        env = g24.Game24Env(numbers)
        worked += (state.numbers == (24,) and g24.verify_expression(numbers, expr)
                   and validate_trajectory(env, replay(env, actions)).valid)
    rng = random.Random(3)
    disagree = same_props = 0
    for _ in range(200):
        numbers = [rng.randint(1, 13) for _ in range(4)]
        sol = g24.brute_force_solve(numbers)
        disagree += (sol is not None) != solvable_24(numbers)
        if sol is not None:
            disagree += not g24.verify_expression(numbers, sol.expression)
        st = g24.G24State(tuple(numbers))
        dec = {a.key() for _, grp in g24.propose_actions_decomposed(st) for a in grp}
        same_props += dec == {a.key() for a in g24.propose_actions_joint(st)}
    ok = worked == 5 and disagree == 0 and same_props == 200
    assert criterion(3, ok, f"game24: worked {worked}/5, {disagree} solver disagreements, "
                            f"decomposed==joint {same_props}/200")


def test_c4_tot_beats_cot(tmp_path, criterion):
    lines, ok = [], True
    for seed in range(5):
        path = tmp_path / f"g24_{seed}.jsonl"
        harness.write_jsonl(path, harness.generate_dataset("game24", {"solvable": True}, 100, seed))
        _, tot = harness.run_experiment(harness.ExperimentConfig.from_mapping(
            {"task": "game24", "mode": "tot", "dataset": str(path), "seed": seed, "beam_width": 5, "epsilon": 0.0}))
        _, cot = harness.run_experiment(harness.ExperimentConfig.from_mapping(
            {"task": "game24", "mode": "cot", "dataset": str(path), "seed": seed,
             "learner": {"kind": "tabular", "demos": 50}}))
        ok &= tot["accuracy"] == 1.0 and cot["accuracy"] < tot["accuracy"]
        lines.append(f"s{seed} tot={tot['accuracy']:.2f} cot={cot['accuracy']:.2f}")
    assert criterion(4, ok, "tot vs cot on 100 solvable game24: " + ", ".join(lines))


def test_c5_blocksworld(criterion):
    expected = {1: 1, 2: 4, 3: 24, 4: 192, 5: 1920, 6: 23040}
    counts = all(bw.count_state_descriptions(k) == n == len(ordered_stack_lists(bw.BLOCK_ORDER[:k]))
                 for k, n in expected.items())
    pool = 0
    for ex in POOL:
        init, plan = bw.parse_state(ex["init"]), bw.parse_plan(ex["plan"])
        state, seen = init, []
        for k, action in enumerate(plan, 1):
            state = bw.apply_bw(state, action)
            if k % 2 == 0:
                seen.append(bw.render_state(state))
        env = bw.BlocksworldEnv(init, bw.parse_goal(ex["goal"]))
        pool += (bw.render_state(init) == ex["init"] and bw.render_plan(plan) == ex["plan"]
                 and seen == ex["states"] and env.verify_answer(ex["plan"]))
    rng, optimal = random.Random(5), 0
    for _ in range(100):
        stacks, goal = random_stacks(rng, bw.BLOCK_ORDER[:4]), random_goal(rng, bw.BLOCK_ORDER[:4])
        plan = bw.optimal_plan(bw.BwState(stacks), goal)
        env = bw.BlocksworldEnv(bw.BwState(stacks), goal)
        optimal += len(plan) == strips_distance(stacks, goal.pairs) and validate_trajectory(env, replay(env, plan)).valid
    ok = counts and pool == len(POOL) == 10 and optimal == 100
    assert criterion(5, ok, f"blocksworld: counts K<=6 {counts}, pool replays {pool}/10, optimal plans {optimal}/100")


def test_c6_routes(criterion):
    rng, queries, wrong, replays, reachable = random.Random(6), 0, 0, 0, 0
    while queries < 1000:
        cities, edges, g = random_sparse_graph(rng, rng.randint(2, 50), directed=rng.random() < 0.3)
        oracle = floyd_warshall(cities, edges, g.directed)
        for _ in range(50):
            a, b = rng.choice(cities), rng.choice(cities)
            route, d = routes.bfs_route(g, a, b), oracle[(a, b)]
            if d == float("inf"):
                wrong += route is not None
            else:
                reachable += 1
                wrong += route is None or len(route) - 1 != d or not routes.is_valid_route(g, route, a, b)
                replays += routes.replay_trace(g, a, b, routes.emit_tot_linear_trace(g, a, b).text) == route
            queries += 1
    first = routes.emit_tot_linear_trace(guatemala_graph(), "Guatemala City", "Guangzhou").lines[0]
    first_ok = first == "The queue is [Guatemala City]. Take the first path, Guatemala City, from the queue."
    ok = wrong == 0 and first_ok and replays == reachable > 0
    assert criterion(6, ok, f"routes: {queries} queries, {wrong} wrong, {replays}/{reachable} traces replayed, "
                            f"first line matches {first_ok}")


def test_c7_sample_complexity(criterion):
    start = time.perf_counter()
    seeds = (0, 1, 2, 3, 4)
    records = sample_complexity_experiment(EquationFamily(4, 10), ("direct", "cot"),
                                           (0, 25, 50, 100, 200, 400, 800, 1600, 3200, 6400, 12800, 25600, 51200,
                                            FULL), seeds, 1000)
    elapsed = time.perf_counter() - start
    wins, parts = 0, []
    for seed in seeds:
        cot, direct = samples_to_threshold(records, "cot", seed), samples_to_threshold(records, "direct", seed)
        wins += cot is not None and direct is not None and direct >= 5 * cot
        parts.append(f"s{seed} cot={cot} direct={direct}")
    ok = wins >= 4 and elapsed < 120
    assert criterion(7, ok, f"samples to 90%: {', '.join(parts)}; {wins}/5 seeds at >=5x, {elapsed:.0f}s")


def test_c8_occam(criterion):
    coverage = simulate_occam(10_000)
    spot = occam_bound(OccamBoundInput(10, 1000, 0.05, 0.0))
    ok = coverage >= 0.95 and abs(spot - 0.08273) <= 1e-4
    assert criterion(8, ok, f"occam: coverage {coverage:.4f}, bound(10 bits, m=1000, delta=0.05) = {spot:.5f}")


def test_c9_self_consistency(criterion):
    build = modular_chain_family()
    model = NoisyFinalStepModel(OracleModel(), 0.3)
    rng, correct = random.Random(9), 0
    for trial in range(500):
        env = EquationEnv(build([rng.randrange(10) for _ in range(4)]))
        correct += env.verify_answer(run_cot_sc(model, env, SearchConfig(seed=trial, sc_samples=101)))
    acc = correct / 500
    assert criterion(9, acc >= 0.97, f"self-consistency k=101 over a 0.7 sampler: {acc:.3f} over 500 trials")


def test_c10_mwis_trace_fidelity(criterion):
    missing, identities = 0, 0
    for style in ("explicit", "implicit"):
        for arr, lines in _chunks(load_fixture(f"mwis_{style}.txt")):
            ours = set(mwis.emit_mwis_trace(mwis.MwisInstance(arr), style).splitlines())
            missing += sum(ln not in ours for ln in lines)
    rng = random.Random(10)
    for _ in range(300):
        arr = [rng.randint(-20, 20) for _ in range(rng.randint(2, 12))]
        text = mwis.emit_mwis_trace(mwis.MwisInstance(arr), "explicit")
        identities += check_identities(text, arr)
        assert mwis.parse_trace_output(text) == mwis_exhaustive(arr)[0]
    ok = missing == 0 and identities > 0
    assert criterion(10, ok, f"mwis traces: {missing} prompt lines not reproduced, {identities} identities re-checked")
