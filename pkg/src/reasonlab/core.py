"""Planning formulation shared by every task: states, actions, transitions, goals.

Each task implements :class:`Environment`.  The module-level functions
(:func:`applicable_actions`, :func:`apply_action`, :func:`is_goal`,
:func:`validate_trajectory`) are the entry points the engine and harness use;
they add canonical ordering and structural checks on top of the task code.
"""

from __future__ import annotations

import enum
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Hashable, Sequence


class PlanningError(Exception):
    """Base class for errors raised by environments."""


class UnknownState(PlanningError):
    pass


class InapplicableAction(PlanningError):
    def __init__(self, action: Any, precondition: str):
        super().__init__(f"{action!r} is not applicable: {precondition}")
        self.action = action
        self.precondition = precondition


class TaskKind(str, enum.Enum):
    EQUATIONS = "equations"
    QA = "qa"
    MWIS = "mwis"
    ROUTES = "routes"
    GAME24 = "game24"
    BLOCKSWORLD = "blocksworld"


class Environment(ABC):
    """A task instance: initial state, applicable actions, transition and goal.

    Subclasses must keep ``transition`` pure.  States are compared through
    :meth:`canonical`, so two representations of the same physical state must
    canonicalize to the same string.
    """

    task_kind: TaskKind

    @property
    @abstractmethod
    def initial_state(self) -> Any: ...

    @abstractmethod
    def actions(self, state: Any) -> list:
        """Applicable actions in any order; duplicates allowed."""

    @abstractmethod
    def transition(self, state: Any, action: Any) -> Any:
        """Return the successor or raise :class:`InapplicableAction`."""

    @abstractmethod
    def goal(self, state: Any) -> bool: ...

    @abstractmethod
    def canonical(self, state: Any) -> str: ...

    def action_key(self, action: Any) -> str:
        return str(action)

    def check_state(self, state: Any) -> None:
        """Raise :class:`UnknownState` if ``state`` breaks task invariants."""

    # -- answers ---------------------------------------------------------
    def answer(self, initial_state: Any, steps: Sequence["Step"]) -> str | None:
        """Canonical answer string for a finished trajectory, if the task has one."""
        return None

    def verify_answer(self, answer: str) -> bool:
        return True

    def canonical_answer(self, answer: str) -> str:
        return answer.strip()

    # -- search oracle ---------------------------------------------------
    max_oracle_states = 200_000

    def goal_distance(self, state: Any) -> int | None:
        """Fewest actions from ``state`` to a goal, or None if unreachable.

        The default is a breadth-first search over canonical states; tasks
        with a cheaper closed form override it.
        """
        if self.goal(state):
            return 0
        seen = {self.canonical(state)}
        frontier = [state]
        depth = 0
        while frontier:
            depth += 1
            nxt = []
            for s in frontier:
                for a in self.actions(s):
                    child = self.transition(s, a)
                    key = self.canonical(child)
                    if key in seen:
                        continue
                    if self.goal(child):
                        return depth
                    seen.add(key)
                    nxt.append(child)
            if len(seen) > self.max_oracle_states:
                raise RuntimeError("state space too large for the default reachability oracle")
            frontier = nxt
        return None

    # -- learner hooks ---------------------------------------------------
    def problem_key(self) -> Hashable:
        """Observation used by a Direct predictor: the whole problem."""
        return self.canonical(self.initial_state)

    def policy_key(self, state: Any) -> Hashable:
        return self.canonical(state)

    def transition_key(self, state: Any, action: Any) -> Hashable:
        return (self.canonical(state), self.action_key(action))

    def transition_value(self, state: Any, action: Any) -> Any:
        """Label a transition predictor should learn for ``transition_key``."""
        return self.transition(state, action)

    def realize(self, state: Any, action: Any, value: Any) -> Any:
        """Build the successor state from a (possibly wrong) predicted value."""
        return value


@dataclass(frozen=True)
class Step:
    action: Any
    next_state: Any
    # actions the proposer offered at the parent state, when recorded
    candidates: tuple | None = None


@dataclass(frozen=True)
class Trajectory:
    initial_state: Any
    steps: tuple[Step, ...] = ()
    answer: str | None = None
    complete: bool = True

    @property
    def last_state(self) -> Any:
        return self.steps[-1].next_state if self.steps else self.initial_state

    def states(self) -> list:
        return [self.initial_state] + [s.next_state for s in self.steps]

    def actions(self) -> list:
        return [s.action for s in self.steps]


class FailureKind(str, enum.Enum):
    BAD_ACTION = "BadAction"
    BAD_TRANSITION = "BadTransition"
    GOAL_UNSATISFIED = "GoalUnsatisfied"
    BAD_ANSWER = "BadAnswer"


@dataclass(frozen=True)
class Verdict:
    valid: bool
    failure_index: int | None = None
    failure_kind: FailureKind | None = None
    detail: str = field(default="", compare=False)

    def __post_init__(self):
        if self.valid != (self.failure_index is None and self.failure_kind is None):
            raise ValueError("valid verdicts carry no failure, invalid ones carry a kind")

    @classmethod
    def ok(cls) -> "Verdict":
        return cls(True)


def applicable_actions(env: Environment, state: Any) -> list:
    """Duplicate-free applicable actions, sorted by their canonical string."""
    env.check_state(state)
    seen: dict[str, Any] = {}
    for action in env.actions(state):
        seen.setdefault(env.action_key(action), action)
    return [seen[k] for k in sorted(seen)]


def apply_action(env: Environment, state: Any, action: Any) -> Any:
    env.check_state(state)
    return env.transition(state, action)


def is_goal(env: Environment, state: Any) -> bool:
    return env.goal(state)


def replay(env: Environment, actions: Sequence[Any], state: Any = None) -> Trajectory:
    """Build the oracle trajectory for ``actions`` from ``state`` (default: initial)."""
    state = env.initial_state if state is None else state
    start = state
    steps = []
    for action in actions:
        state = env.transition(state, action)
        steps.append(Step(action, state))
    answer = env.answer(start, steps) if env.goal(state) else None
    return Trajectory(start, tuple(steps), answer, complete=env.goal(state))


def validate_trajectory(env: Environment, traj: Trajectory) -> Verdict:
    """Replay ``traj`` against the true transition and report the first failure."""
    state = traj.initial_state
    for i, step in enumerate(traj.steps):
        keys = {env.action_key(a) for a in env.actions(state)}
        if env.action_key(step.action) not in keys:
            return Verdict(False, i, FailureKind.BAD_ACTION, env.action_key(step.action))
        expected = env.transition(state, step.action)
        if env.canonical(expected) != env.canonical(step.next_state):
            return Verdict(False, i, FailureKind.BAD_TRANSITION,
                           f"expected {env.canonical(expected)}")
        state = step.next_state
    if traj.complete and not env.goal(state):
        return Verdict(False, len(traj.steps), FailureKind.GOAL_UNSATISFIED)
    if traj.answer is not None and not env.verify_answer(traj.answer):
        return Verdict(False, len(traj.steps), FailureKind.BAD_ANSWER, traj.answer)
    return Verdict.ok()
