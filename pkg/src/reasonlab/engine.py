"""Direct, CoT, CoT-SC and ToT (beam search) over any :class:`Environment`.

A step model supplies the three things a reasoner needs at a state: one
proposed action (greedy CoT), a candidate list (ToT) and a predicted next
state.  Models may abstain by returning :data:`ABSTAIN`; an abstention ends a
rollout instead of forcing a guess.
"""

from __future__ import annotations

import enum
import random
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Hashable, Protocol, Sequence

from reasonlab.core import (Environment, PlanningError, Step, Trajectory, applicable_actions)


class _Abstain:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "ABSTAIN"

    def __bool__(self):
        return False


ABSTAIN = _Abstain()


def is_abstain(x) -> bool:
    return x is ABSTAIN


class Predictor(Protocol):
    def predict(self, key: Hashable) -> Any: ...

    def sample(self, key: Hashable, rng: random.Random) -> Any: ...


class StepModel(Protocol):
    def propose(self, env: Environment, state: Any, rng: random.Random | None = None) -> Any: ...

    def candidates(self, env: Environment, state: Any) -> list: ...

    def step(self, env: Environment, state: Any, action: Any, rng: random.Random | None = None) -> Any: ...


class Rating(enum.IntEnum):
    IMPOSSIBLE = 0
    MAYBE = 1
    SURE = 2


class Evaluator(Protocol):
    def score(self, env: Environment, state: Any) -> tuple[Rating, float]: ...


@dataclass(frozen=True)
class SearchConfig:
    beam_width: int = 5
    max_depth: int = 64
    sc_samples: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.beam_width < 1 or self.max_depth < 1 or self.sc_samples < 1:
            raise ValueError("beam_width, max_depth and sc_samples must all be >= 1")


def sub_seed(seed: int, index: int) -> str:
    return f"{seed}/{index}"


# -- models ---------------------------------------------------------------

@dataclass(frozen=True)
class OracleModel:
    """Perfect policy and transition.

    ``propose`` picks the applicable action whose successor is closest to a goal
    (canonical order breaks ties); ``proposer`` optionally replaces the
    candidate generator, e.g. with a task's decomposed proposal.
    """

    proposer: Callable[[Environment, Any], list] | None = None

    def candidates(self, env, state):
        if self.proposer is not None:
            return list(self.proposer(env, state))
        return applicable_actions(env, state)

    def propose(self, env, state, rng=None):
        best, best_d = ABSTAIN, None
        for a in self.candidates(env, state):
            d = env.goal_distance(env.transition(state, a))
            if d is not None and (best_d is None or d < best_d):
                best, best_d = a, d
        return best

    def step(self, env, state, action, rng=None):
        return env.transition(state, action)


@dataclass(frozen=True)
class FirstProposalModel:
    """Greedy baseline: always take the first candidate in canonical order."""

    def candidates(self, env, state):
        return applicable_actions(env, state)

    def propose(self, env, state, rng=None):
        acts = applicable_actions(env, state)
        return acts[0] if acts else ABSTAIN

    def step(self, env, state, action, rng=None):
        return env.transition(state, action)


@dataclass(frozen=True)
class NoisyFinalStepModel:
    """Wraps a model; the step that reaches the goal is corrupted with probability ``error_rate``.

    The corrupted successor is built through ``env.realize`` with ``perturb``
    applied to the true transition value, so each rollout is right with
    probability exactly ``1 - error_rate``.
    """

    base: Any
    error_rate: float
    perturb: Callable[[Any], Any] = lambda v: v + 1

    def candidates(self, env, state):
        return self.base.candidates(env, state)

    def propose(self, env, state, rng=None):
        return self.base.propose(env, state, rng)

    def step(self, env, state, action, rng=None):
        nxt = self.base.step(env, state, action, rng)
        if rng is not None and not is_abstain(nxt) and env.goal(nxt) and rng.random() < self.error_rate:
            return env.realize(state, action, self.perturb(env.transition_value(state, action)))
        return nxt


# -- evaluators -----------------------------------------------------------

@dataclass(frozen=True)
class NoisyOracleEvaluator:
    """Reachability oracle whose rating flips to a uniformly random other rating w.p. epsilon.

    The flip for a state is drawn from an rng seeded by (seed, canonical state),
    so a state is scored identically every time it is met.
    """

    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    def base_score(self, env, state) -> tuple[Rating, float]:
        try:
            d = env.goal_distance(state)
        except PlanningError:
            d = None
        if d is None:
            return Rating.IMPOSSIBLE, 0.0
        return Rating.SURE, 1.0 / (1 + d)

    def score(self, env, state):
        rating, value = self.base_score(env, state)
        if self.epsilon > 0:
            rng = random.Random(f"{self.seed}:{env.canonical(state)}")
            if rng.random() < self.epsilon:
                rating = rng.choice([r for r in Rating if r != rating])
        return rating, value


# -- results --------------------------------------------------------------

class Status(str, enum.Enum):
    GOAL = "goal"
    ABSTAIN = "abstain"
    DEPTH_EXCEEDED = "depth_exceeded"
    NO_GOAL = "no_goal"  # ToT exhausted its budget; answer is the best leaf's attempt


@dataclass(frozen=True)
class RunResult:
    trajectory: Trajectory
    answer: Any
    status: Status
    flagged: bool = False

    def __iter__(self):
        yield self.trajectory
        yield self.answer


def _answer(env, init, steps):
    try:
        ans = env.answer(init, steps)
    except (PlanningError, KeyError, ValueError):
        ans = None
    return ABSTAIN if ans is None else ans


def _goal(env, state) -> bool:
    try:
        return env.goal(state)
    except (PlanningError, KeyError, ValueError, TypeError):
        return False


def run_direct(predictor: Predictor, env: Environment) -> Any:
    return predictor.predict(env.problem_key())


def _rollout(model, env, config: SearchConfig, rng: random.Random) -> RunResult:
    init = env.initial_state
    state = init
    steps: list[Step] = []
    for _ in range(config.max_depth):
        if _goal(env, state):
            break
        action = model.propose(env, state, rng)
        if is_abstain(action):
            return RunResult(Trajectory(init, tuple(steps), None, False), ABSTAIN, Status.ABSTAIN)
        nxt = model.step(env, state, action, rng)
        if is_abstain(nxt):
            return RunResult(Trajectory(init, tuple(steps), None, False), ABSTAIN, Status.ABSTAIN)
        steps.append(Step(action, nxt))
        state = nxt
    if not _goal(env, state):
        return RunResult(Trajectory(init, tuple(steps), None, False), ABSTAIN, Status.DEPTH_EXCEEDED)
    ans = _answer(env, init, steps)
    return RunResult(Trajectory(init, tuple(steps), None if is_abstain(ans) else ans, True), ans, Status.GOAL)


def run_cot(model: StepModel, env: Environment, config: SearchConfig = SearchConfig()) -> RunResult:
    """Greedy rollout; the trajectory keeps the model's own (possibly wrong) states."""
    return _rollout(model, env, config, random.Random(sub_seed(config.seed, 0)))


def majority_vote(answers: Sequence[Any], canonical: Callable[[Any], str] = str) -> Any:
    """Most common canonical answer; ties go to the smallest string; all-abstain abstains."""
    votes = Counter(canonical(a) for a in answers if not is_abstain(a))
    if not votes:
        return ABSTAIN
    top = max(votes.values())
    return min(k for k, v in votes.items() if v == top)


def run_cot_sc(model: StepModel, env: Environment, config: SearchConfig = SearchConfig()) -> Any:
    answers = [_rollout(model, env, config, random.Random(sub_seed(config.seed, i))).answer
               for i in range(config.sc_samples)]
    return majority_vote(answers, env.canonical_answer)


@dataclass
class _Node:
    state: Any
    steps: tuple[Step, ...]
    key: str


def run_tot(model: StepModel, evaluator: Evaluator, env: Environment,
            config: SearchConfig = SearchConfig()) -> RunResult:
    """Breadth-wise beam search; children of already-expanded states are pruned."""
    init = env.initial_state
    if _goal(env, init):
        return RunResult(Trajectory(init, (), _none(_answer(env, init, [])), True), _answer(env, init, []),
                         Status.GOAL)
    beam = [_Node(init, (), env.canonical(init))]
    expanded = {beam[0].key}
    rng = random.Random(sub_seed(config.seed, 0))
    for _ in range(config.max_depth):
        children: list[_Node] = []
        seen = set()
        for node in beam:
            cands = tuple(model.candidates(env, node.state))
            for action in cands:
                try:
                    nxt = model.step(env, node.state, action, rng)
                    if is_abstain(nxt):
                        continue
                    key = env.canonical(nxt)
                except (PlanningError, KeyError, ValueError):
                    continue
                if key in expanded or key in seen:
                    continue
                seen.add(key)
                child = _Node(nxt, node.steps + (Step(action, nxt, cands),), key)
                if _goal(env, nxt):
                    ans = _answer(env, init, child.steps)
                    return RunResult(Trajectory(init, child.steps, _none(ans), True), ans, Status.GOAL)
                children.append(child)
        if not children:
            break
        scored = []
        for c in children:
            rating, value = evaluator.score(env, c.state)
            scored.append(((-int(rating), -value, c.key), c))
        scored.sort(key=lambda sc: sc[0])
        beam = [c for _, c in scored[: config.beam_width]]
        expanded.update(c.key for c in beam)
    best = beam[0]
    ans = _answer(env, init, best.steps)
    return RunResult(Trajectory(init, best.steps, _none(ans), False), ans, Status.NO_GOAL, flagged=True)


def _none(ans):
    return None if is_abstain(ans) else ans


# -- error taxonomy -------------------------------------------------------

class ErrorClass(str, enum.Enum):
    TRANSITION = "TransitionError"
    PROPOSAL = "ProposalError"
    MISSING_ACTIONS = "MissingActions"
    ANSWER = "AnswerError"


def classify_errors(env: Environment, traj: Trajectory) -> list[tuple[int, ErrorClass]]:
    """Tag each step with the taxonomy classes it exhibits.

    ProposalError: the action is not applicable in the recorded state (it uses
    numbers/objects that are not there).  TransitionError: the action is
    applicable but the recorded next state differs from the true successor.
    MissingActions: the recorded candidate list leaves out an applicable action
    from which the goal is still reachable.  AnswerError (reported at index
    len(steps)): every step is sound and the goal holds, yet the final answer
    fails the verifier.
    """
    out: list[tuple[int, ErrorClass]] = []
    state = traj.initial_state
    for i, step in enumerate(traj.steps):
        try:
            valid = {env.action_key(a): a for a in env.actions(state)}
        except (PlanningError, KeyError, ValueError, TypeError):
            break
        key = env.action_key(step.action)
        if key not in valid:
            out.append((i, ErrorClass.PROPOSAL))
        else:
            truth = env.transition(state, step.action)
            try:
                same = env.canonical(truth) == env.canonical(step.next_state)
            except (PlanningError, KeyError, ValueError, TypeError, AttributeError):
                same = False
            if not same:
                out.append((i, ErrorClass.TRANSITION))
        if step.candidates is not None:
            offered = {env.action_key(a) for a in step.candidates}
            for k, a in valid.items():
                if k not in offered and env.goal_distance(env.transition(state, a)) is not None:
                    out.append((i, ErrorClass.MISSING_ACTIONS))
                    break
        state = step.next_state
    if not out and traj.answer is not None and _goal(env, state) and not env.verify_answer(traj.answer):
        out.append((len(traj.steps), ErrorClass.ANSWER))
    return out
