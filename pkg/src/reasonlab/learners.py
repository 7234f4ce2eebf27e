"""Memorizing learners, exact description-length accounting and the Occam bound.

A :class:`TabularPredictor` is a lookup table that abstains on unseen keys.  A
:class:`DecomposedPredictor` pairs a policy table (which action next) with one
transition table per reusable component, and acts as a step model for the
engine, so CoT over a learned model is just :func:`reasonlab.engine.run_cot`.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import random
import statistics
from dataclasses import dataclass
from typing import Any, Hashable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from reasonlab.core import Environment
from reasonlab.engine import ABSTAIN, SearchConfig, is_abstain, run_cot, run_direct


class ConflictingExamples(ValueError):
    def __init__(self, key, old, new):
        super().__init__(f"key {key!r} labelled both {old!r} and {new!r}")
        self.key = key


class DomainError(ValueError):
    pass


def bits_for(k: int) -> int:
    """ceil(log2 k) integer bits, at least 1."""
    return max(1, (k - 1).bit_length())


@dataclass(frozen=True)
class TabularPredictor:
    table: Mapping[Hashable, Any]
    key_arity: int | None = None
    value_bits: int | None = None

    def predict(self, key):
        return self.table.get(key, ABSTAIN)

    def sample(self, key, rng):
        return self.predict(key)

    @property
    def entries(self) -> int:
        return len(self.table)

    def digest(self) -> str:
        h = hashlib.sha256()
        for k in sorted(self.table, key=repr):
            h.update(repr((k, self.table[k])).encode())
        return h.hexdigest()

    def dl(self) -> "DLAccount":
        return DLAccount(self.entries, self.value_bits or 1)


def _insert(table: dict, key, value, on_conflict: str) -> None:
    old = table.setdefault(key, value)
    if old != value and on_conflict == "error":
        raise ConflictingExamples(key, old, value)


def train_tabular(examples: Iterable[tuple[Hashable, Any]], key_arity: int | None = None,
                  value_bits: int | None = None, on_conflict: str = "error") -> TabularPredictor:
    """Exact memorization.  ``on_conflict='first'`` keeps the earliest label instead of raising."""
    table: dict = {}
    for key, value in examples:
        _insert(table, key, value, on_conflict)
    return TabularPredictor(dict(sorted(table.items(), key=lambda kv: repr(kv[0]))), key_arity, value_bits)


def predict(predictor, key, env: Environment | None = None):
    """Table lookup, or for a decomposed predictor a full policy-then-transition rollout."""
    if isinstance(predictor, DecomposedPredictor):
        if env is None:
            raise ValueError("a decomposed predictor needs the environment to compose steps")
        return run_cot(predictor, env).answer
    return predictor.predict(key)


def _component(key) -> tuple[Hashable, Hashable]:
    if isinstance(key, tuple) and key:
        return key[0], key[1:]
    return "_", key


@dataclass(frozen=True)
class DecomposedPredictor:
    policy: TabularPredictor
    transitions: Mapping[Hashable, TabularPredictor]

    @property
    def entries(self) -> int:
        return self.policy.entries + sum(t.entries for t in self.transitions.values())

    def propose(self, env, state, rng=None):
        return self.policy.predict(env.policy_key(state))

    def candidates(self, env, state):
        a = self.propose(env, state)
        return [] if is_abstain(a) else [a]

    def step(self, env, state, action, rng=None):
        comp, rest = _component(env.transition_key(state, action))
        table = self.transitions.get(comp)
        if table is None:
            return ABSTAIN
        value = table.predict(rest)
        return ABSTAIN if is_abstain(value) else env.realize(state, action, value)

    def dl(self) -> "DLBreakdown":
        parts = [("policy", self.policy.dl())] + [(str(c), t.dl()) for c, t in sorted(
            self.transitions.items(), key=lambda kv: repr(kv[0]))]
        return DLBreakdown(tuple(parts))


class DecomposedTrainer:
    """Incrementally collects policy and transition examples from demonstrations."""

    def __init__(self, value_bits: int | None = None, policy_bits: int | None = None, on_conflict: str = "error"):
        self.policy: dict = {}
        self.transitions: dict[Hashable, dict] = {}
        self.value_bits = value_bits
        self.policy_bits = policy_bits
        self.on_conflict = on_conflict

    def add(self, env: Environment, actions: Sequence[Any]) -> None:
        state = env.initial_state
        for action in actions:
            _insert(self.policy, env.policy_key(state), action, self.on_conflict)
            comp, rest = _component(env.transition_key(state, action))
            _insert(self.transitions.setdefault(comp, {}), rest, env.transition_value(state, action),
                    self.on_conflict)
            state = env.transition(state, action)

    def build(self) -> DecomposedPredictor:
        return DecomposedPredictor(
            TabularPredictor(dict(self.policy), None, self.policy_bits),
            {c: TabularPredictor(dict(t), None, self.value_bits) for c, t in self.transitions.items()})


def train_decomposed(demos: Iterable[tuple[Environment, Sequence[Any]]], value_bits: int | None = None,
                     policy_bits: int | None = None, on_conflict: str = "error") -> DecomposedPredictor:
    trainer = DecomposedTrainer(value_bits, policy_bits, on_conflict)
    for env, actions in demos:
        trainer.add(env, actions)
    return trainer.build()


# -- description length ---------------------------------------------------

@dataclass(frozen=True)
class DLAccount:
    entries: int
    bits_per_entry: int
    label: str = ""

    @property
    def total_bits(self) -> int:
        return self.entries * self.bits_per_entry


@dataclass(frozen=True)
class DLBreakdown:
    parts: tuple[tuple[str, DLAccount], ...]

    @property
    def entries(self) -> int:
        return sum(a.entries for _, a in self.parts)

    @property
    def total_bits(self) -> int:
        return sum(a.total_bits for _, a in self.parts)

    def part(self, name: str) -> DLAccount:
        return dict(self.parts)[name]


def description_length(kind: str, k: int, n: int | None = None, arities: Sequence[int] | None = None,
                       m: int | None = None, value_bits: int | None = None,
                       policy_bits: int = 1) -> DLAccount | DLBreakdown:
    """Exact table sizes.

    ``direct``: K^N entries.  ``decomposed``: sum of K^a_i transition entries,
    plus a 2^M observed-mask policy when ``m`` is given.  ``policy``: the 2^M
    binary-observation table alone.  Python integers never overflow.
    """
    if k < 1 or any(x is not None and x < 1 for x in (n, m, value_bits)):
        raise ValueError("all counts must be >= 1")
    vb = value_bits if value_bits is not None else bits_for(k)
    if kind == "direct":
        if n is None:
            raise ValueError("direct needs n")
        return DLAccount(k ** n, vb, "direct")
    if kind == "policy":
        if m is None:
            raise ValueError("policy needs m")
        return DLAccount(2 ** m, policy_bits, "policy")
    if kind == "decomposed":
        if not arities or any(a < 1 for a in arities):
            raise ValueError("decomposed needs a non-empty arity list")
        parts = [("transitions", DLAccount(sum(k ** a for a in arities), vb, "transitions"))]
        if m is not None:
            parts.append(("policy", DLAccount(2 ** m, policy_bits, "policy")))
        return DLBreakdown(tuple(parts))
    raise ValueError(f"unknown kind {kind!r}")


def blocksworld_table_bits(k: int) -> dict[str, DLAccount]:
    """The two Blocksworld table sizes, each with unit constants, kept side by side.

    ``direct_plans``: start states x goal constraints x plan length entries,
    K!·2^(K-1)·K^3 log K bits.  ``policy``: current states x goal constraints,
    K!·2^(K-1)·K^2 log K bits.
    """
    states = math.factorial(k) * 2 ** (k - 1)
    b = bits_for(k)
    return {"direct_plans": DLAccount(states * k ** 3, b, "direct_plans"),
            "policy": DLAccount(states * k ** 2, b, "policy")}


# -- Occam bound ----------------------------------------------------------

@dataclass(frozen=True)
class OccamBoundInput:
    h_bits: float
    m: int
    delta: float
    empirical_loss: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.m < 1:
            raise DomainError("m must be >= 1")
        if not 0.0 <= self.empirical_loss <= 1.0:
            raise DomainError("empirical loss must lie in [0, 1]")
        if self.h_bits < 0:
            raise DomainError("description length must be non-negative")


def occam_bound(inp: OccamBoundInput) -> float:
    return inp.empirical_loss + math.sqrt((inp.h_bits + math.log(2.0 / inp.delta)) / (2.0 * inp.m))


def simulate_occam(trials: int = 10_000, n_hypotheses: int = 16, m: int = 200, delta: float = 0.05,
                   seed: int = 0) -> float:
    """Fraction of trials where every hypothesis satisfies L_D <= bound.

    Hypothesis j has a unary (prefix-free) code of j bits and a Bernoulli loss
    with mean drawn uniformly per trial; empirical losses come from m draws.
    """
    rng = np.random.default_rng(seed)
    lengths = np.arange(1, n_hypotheses + 1)
    true = rng.uniform(0, 1, size=(trials, n_hypotheses))
    emp = rng.binomial(m, true) / m
    slack = np.sqrt((lengths + math.log(2.0 / delta)) / (2.0 * m))
    ok = np.all(true <= emp + slack, axis=1)
    return float(ok.mean())


# -- sample-complexity experiment -----------------------------------------

class TaskFamily(Protocol):
    name: str
    k: int

    def sample(self, rng: random.Random) -> Environment: ...

    def domain(self) -> Iterable[Environment]: ...

    def demonstrate(self, env: Environment) -> list: ...

    def oracle_answer(self, env: Environment) -> str: ...


class EquationFamily:
    """Fixed chain ``y1 = x1 + x2``, ``y2 = y1 * x3``, ``y3 = y2 + x4`` (mod K) by default.

    The add component is reused, so a decomposed learner shares its table
    across steps while a direct learner must see every input tuple.
    """

    def __init__(self, n_inputs: int = 4, k: int = 10, ops: Sequence[str] | None = None):
        from reasonlab.tasks.equations import EquationEnv, forward_chain_solve, modular_chain_family
        self.name = f"equations-n{n_inputs}-k{k}"
        self.n_inputs = n_inputs
        self.k = k
        self._build = modular_chain_family(n_inputs, k, ops)
        self._env = EquationEnv
        self._solve = forward_chain_solve

    def make(self, inputs: Sequence[int]) -> Environment:
        return self._env(self._build(inputs))

    def sample(self, rng):
        return self.make([rng.randrange(self.k) for _ in range(self.n_inputs)])

    def domain(self):
        for inputs in itertools.product(range(self.k), repeat=self.n_inputs):
            yield self.make(inputs)

    def demonstrate(self, env):
        return self._solve(env.system)[1]

    def oracle_answer(self, env):
        return env.canonical_answer(str(self._solve(env.system)[0]))


@dataclass(frozen=True)
class CurvePoint:
    learner: str
    samples: int
    seed: int
    accuracy: float
    abstain_rate: float
    dl_bits: int
    guess_accuracy: float
    full_domain: bool = False

    def to_json(self) -> dict:
        return {"learner": self.learner, "samples": self.samples, "seed": self.seed,
                "accuracy": round(self.accuracy, 6), "abstain_rate": round(self.abstain_rate, 6),
                "dl_bits": self.dl_bits, "guess_accuracy": round(self.guess_accuracy, 6),
                "full_domain": self.full_domain}


FULL = "full"
DEFAULT_GRID = (0, 25, 50, 100, 200, 400, 800, 1600, 3200, 6400, 12800, 25600, 51200, FULL)


def _evaluate(learner: str, model, family, eval_set, answers) -> tuple[float, float]:
    correct = abstained = 0
    for env, gold in zip(eval_set, answers):
        if learner == "direct":
            got = run_direct(model, env)
        else:
            got = run_cot(model, env, SearchConfig(max_depth=4 * family.n_inputs + 8)).answer
        if is_abstain(got):
            abstained += 1
        elif env.canonical_answer(str(got)) == gold:
            correct += 1
    n = len(eval_set)
    return correct / n, abstained / n


def sample_complexity_experiment(family, learner_kinds: Sequence[str] = ("direct", "cot"),
                                 sample_grid: Sequence[int | str] = DEFAULT_GRID,
                                 seeds: Sequence[int] = (0, 1, 2, 3, 4), n_eval: int = 1000) -> list[CurvePoint]:
    """Train both learners on growing prefixes of one i.i.d. demonstration stream per seed.

    Direct sees (problem, answer); the decomposed learner sees every
    (policy observation, action) and (component inputs, output) pair.  The
    evaluation set is a separate i.i.d. draw from the family.  ``"full"``
    trains on every domain instance exactly once.
    """
    for kind in learner_kinds:
        if kind not in ("direct", "cot"):
            raise ValueError(f"unknown learner kind {kind!r}")
    numeric = sorted(g for g in sample_grid if g != FULL)
    if any(g < 0 for g in numeric):
        raise ValueError("grid sizes must be non-negative")
    vb = bits_for(family.k)
    records: list[CurvePoint] = []
    for seed in seeds:
        eval_rng = random.Random(f"eval:{seed}")
        eval_set = [family.sample(eval_rng) for _ in range(n_eval)]
        answers = [family.oracle_answer(env) for env in eval_set]
        train_rng = random.Random(f"train:{seed}")
        direct: dict = {}
        trainer = DecomposedTrainer(vb, 1)
        seen = 0

        def snapshot(samples: int, full: bool = False):
            for kind in learner_kinds:
                if kind == "direct":
                    model = TabularPredictor(dict(direct), family.n_inputs, vb)
                    dl = model.dl().total_bits
                else:
                    model = trainer.build()
                    n_actions = max(1, len(set(trainer.policy.values())))
                    model = DecomposedPredictor(TabularPredictor(model.policy.table, None, bits_for(n_actions)),
                                                model.transitions)
                    dl = model.dl().total_bits
                acc, abst = _evaluate(kind, model, family, eval_set, answers)
                records.append(CurvePoint(kind, samples, seed, acc, abst, dl, acc + abst / family.k, full))

        for target in numeric:
            while seen < target:
                env = family.sample(train_rng)
                _insert(direct, env.problem_key(), family.oracle_answer(env), "error")
                trainer.add(env, family.demonstrate(env))
                seen += 1
            snapshot(target)
        if FULL in sample_grid:
            direct.clear()
            trainer = DecomposedTrainer(vb, 1)
            count = 0
            for env in family.domain():
                _insert(direct, env.problem_key(), family.oracle_answer(env), "error")
                trainer.add(env, family.demonstrate(env))
                count += 1
            snapshot(count, True)
    return records


def samples_to_threshold(records: Sequence[CurvePoint], learner: str, seed: int, threshold: float = 0.9) -> int | None:
    hits = [r.samples for r in records
            if r.learner == learner and r.seed == seed and not r.full_domain and r.accuracy >= threshold]
    return min(hits) if hits else None


def summarize_curves(records: Sequence[CurvePoint]) -> list[dict]:
    """Mean and standard deviation of accuracy per (learner, samples)."""
    groups: dict[tuple[str, bool, int], list[float]] = {}
    for r in records:
        groups.setdefault((r.learner, r.full_domain, r.samples), []).append(r.accuracy)
    out = []
    for (learner, full, samples), accs in sorted(groups.items()):
        out.append({"learner": learner, "samples": samples, "full_domain": full, "mean": statistics.fmean(accs),
                    "stddev": statistics.pstdev(accs) if len(accs) > 1 else 0.0, "seeds": len(accs)})
    return out


def render_curve_table(records: Sequence[CurvePoint]) -> str:
    rows = summarize_curves(records)
    learners = sorted({r["learner"] for r in rows})
    grid = sorted({(r["full_domain"], r["samples"]) for r in rows})
    cell = {(r["learner"], r["full_domain"], r["samples"]): r for r in rows}
    lines = ["samples".rjust(10) + "".join(f"{ln:>18}" for ln in learners)]
    for full, g in grid:
        parts = []
        for ln in learners:
            r = cell.get((ln, full, g))
            parts.append(f"{r['mean']:>10.3f} ±{r['stddev']:.3f}" if r else " " * 18)
        label = f"{g} (all)" if full else str(g)
        lines.append(f"{label:>10}" + "".join(parts))
    return "\n".join(lines) + "\n"
