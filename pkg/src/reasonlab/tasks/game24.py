"""Game of 24 over exact rationals.

A state is the sorted multiset of remaining numbers.  An action names two
operand *values* and an operator; it is applicable when both values are still
available (two copies if they are equal).  Rendering rounds non-integers to two
decimals half-up, the way the step lines are written, but every check uses the
exact value.
"""

from __future__ import annotations

import ast
import itertools
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Iterable, Sequence

from reasonlab.core import Environment, InapplicableAction, Step, TaskKind, UnknownState

OPS = ("+", "-", "*", "/")
TARGET = Fraction(24)


class ParseError(ValueError):
    pass


class BrokenProvenance(ValueError):
    pass


def fmt(x: Fraction | int) -> str:
    """Display form: integers plainly, other values rounded to 2 decimals half-up."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    q = (Decimal(x.numerator) / Decimal(x.denominator)).quantize(Decimal("0.01"), ROUND_HALF_UP)
    text = format(q, "f").rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def exact(x: Fraction) -> str:
    return str(Fraction(x))


def compute(a: Fraction, op: str, b: Fraction) -> Fraction:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise ZeroDivisionError(f"{fmt(a)} / 0")
        return a / b
    raise ValueError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class G24State:
    numbers: tuple[Fraction, ...]
    target: Fraction = TARGET

    def __post_init__(self):
        object.__setattr__(self, "numbers", tuple(sorted(Fraction(v) for v in self.numbers)))
        object.__setattr__(self, "target", Fraction(self.target))

    def render(self) -> str:
        return " ".join(fmt(v) for v in self.numbers)


@dataclass(frozen=True)
class G24Action:
    a: Fraction
    op: str
    b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))

    @property
    def result(self) -> Fraction:
        return compute(self.a, self.op, self.b)

    def key(self) -> str:
        """Exact form; operands of + and * are ordered so commuted steps share a key."""
        a, b = self.a, self.b
        if self.op in "+*" and b < a:
            a, b = b, a
        return f"{exact(a)} {self.op} {exact(b)}"

    def render(self) -> str:
        return f"{fmt(self.a)} {self.op} {fmt(self.b)}"

    def __str__(self):
        return self.key()


@dataclass(frozen=True)
class PairSelection:
    """Positional choice of two numbers in the sorted state (``i < j``)."""

    i: int
    j: int

    def render(self, state: G24State) -> str:
        return " ".join(f"({fmt(v)})" if k in (self.i, self.j) else fmt(v)
                        for k, v in enumerate(state.numbers))


def _remove(numbers: Sequence[Fraction], *values: Fraction) -> list[Fraction] | None:
    rest = list(numbers)
    for v in values:
        if v not in rest:
            return None
        rest.remove(v)
    return rest


def apply_g24(state: G24State, action: G24Action) -> G24State:
    rest = _remove(state.numbers, action.a, action.b)
    if rest is None:
        raise InapplicableAction(action, f"operands {action.render()} not available in {state.render()}")
    if action.op == "/" and action.b == 0:
        raise InapplicableAction(action, "division requires a nonzero divisor")
    return G24State(tuple(rest) + (action.result,), state.target)


def _pair_actions(a: Fraction, b: Fraction) -> list[G24Action]:
    out = [G24Action(a, "+", b), G24Action(a, "*", b), G24Action(a, "-", b), G24Action(b, "-", a)]
    if b != 0:
        out.append(G24Action(a, "/", b))
    if a != 0:
        out.append(G24Action(b, "/", a))
    return out


def _dedup_sorted(actions: Iterable[G24Action]) -> list[G24Action]:
    seen = {act.key(): act for act in actions}
    return [seen[k] for k in sorted(seen)]


def propose_actions_joint(state: G24State, dedup: bool = True) -> list[G24Action]:
    """Every (pair, operator) action; ``dedup=False`` keeps one entry per positional pair."""
    nums = state.numbers
    actions = []
    for i, j in itertools.combinations(range(len(nums)), 2):
        if dedup:
            actions.extend(_pair_actions(nums[i], nums[j]))
        else:
            a, b = nums[i], nums[j]
            actions.extend([G24Action(a, "+", b), G24Action(a, "*", b), G24Action(a, "-", b),
                            G24Action(b, "-", a), G24Action(a, "/", b), G24Action(b, "/", a)])
    if not dedup:
        return actions
    return _dedup_sorted(actions)


def select_pairs(state: G24State) -> list[PairSelection]:
    """Stage one of the decomposed proposal: the C(n,2) positional pairs."""
    n = len(state.numbers)
    # bracket listing order: adjacent pairs, then the remaining pairs lexicographically
    adjacent = [(i, i + 1) for i in range(n - 1)]
    rest = [p for p in itertools.combinations(range(n), 2) if p[1] - p[0] > 1]
    return [PairSelection(i, j) for i, j in adjacent + rest]


def expand_pair(state: G24State, pair: PairSelection) -> list[G24Action]:
    """Stage two: at most six operator actions for the selected pair."""
    return _dedup_sorted(_pair_actions(state.numbers[pair.i], state.numbers[pair.j]))


def propose_actions_decomposed(state: G24State) -> list[tuple[PairSelection, list[G24Action]]]:
    return [(pair, expand_pair(state, pair)) for pair in select_pairs(state)]


def render_step(state: G24State, action: G24Action) -> str:
    after = apply_g24(state, action)
    return f"{action.render()} = {fmt(action.result)} (left: {after.render()})"


def render_replace_step(state: G24State, pair: PairSelection, action: G24Action) -> str:
    """Stage-two line: ``a op b = c, replace x y by c (left: ...)``.

    The first selected number is dropped and the result takes the second one's slot.
    """
    apply_g24(state, action)
    left = [fmt(action.result) if k == pair.j else fmt(v) for k, v in enumerate(state.numbers) if k != pair.i]
    x, y = state.numbers[pair.i], state.numbers[pair.j]
    return (f"{action.render()} = {fmt(action.result)}, replace {fmt(x)} {fmt(y)} by "
            f"{fmt(action.result)} (left: {' '.join(left)})")


# -- solving --------------------------------------------------------------

@dataclass(frozen=True)
class G24Solution:
    numbers: tuple[Fraction, ...]
    steps: tuple[G24Action, ...]
    states: tuple[G24State, ...]
    expression: str
    target: Fraction = TARGET

    def to_json(self) -> dict:
        return {
            "numbers": [exact(v) for v in self.numbers],
            "steps": [render_step(s, a) for s, a in zip(self.states, self.steps)],
            "expression": self.expression,
            "verified": verify_expression(self.numbers, self.expression, self.target),
        }


def _dfs(state: G24State) -> list[G24Action] | None:
    if len(state.numbers) == 1:
        return [] if state.numbers[0] == state.target else None
    for action in propose_actions_joint(state):
        rest = _dfs(apply_g24(state, action))
        if rest is not None:
            return [action] + rest
    return None


def brute_force_solve(numbers: Sequence, target=TARGET) -> G24Solution | None:
    """Depth-first search over actions in canonical order; first solution wins."""
    if not 2 <= len(numbers) <= 4:
        raise ValueError("brute force handles 2 to 4 numbers")
    start = G24State(tuple(numbers), target)
    actions = _dfs(start)
    if actions is None:
        return None
    states = [start]
    for act in actions:
        states.append(apply_g24(states[-1], act))
    expr = assemble_expression(start.numbers, actions)
    return G24Solution(start.numbers, tuple(actions), tuple(states[:-1]), expr, start.target)


def is_solvable(numbers: Sequence, target=TARGET) -> bool:
    return _reachable(tuple(sorted(Fraction(v) for v in numbers)), Fraction(target))


_REACH_CACHE: dict[tuple, bool] = {}


def _reachable(nums: tuple[Fraction, ...], target: Fraction) -> bool:
    key = (nums, target)
    hit = _REACH_CACHE.get(key)
    if hit is not None:
        return hit
    if len(nums) == 1:
        ok = nums[0] == target
    else:
        state = G24State(nums, target)
        ok = any(_reachable(apply_g24(state, a).numbers, target) for a in propose_actions_joint(state))
    if len(_REACH_CACHE) > 500_000:
        _REACH_CACHE.clear()
    _REACH_CACHE[key] = ok
    return ok


def count_solutions(numbers: Sequence, target=TARGET) -> int:
    """Number of distinct action sequences (after per-state dedup) reaching the target."""
    def count(state: G24State) -> int:
        if len(state.numbers) == 1:
            return int(state.numbers[0] == state.target)
        return sum(count(apply_g24(state, a)) for a in propose_actions_joint(state))
    return count(G24State(tuple(numbers), target))


# -- expressions ----------------------------------------------------------

def assemble_expression(numbers: Sequence, steps: Sequence[G24Action]) -> str:
    """Substitute each operand by the expression of the step that produced it.

    Operands are matched to the most recent unconsumed producer of the same
    value, falling back to an unused input number.
    """
    pool: list[tuple[Fraction, str, bool]] = [(Fraction(v), fmt(v), False) for v in numbers]
    for k, step in enumerate(steps):
        parts = []
        for value in (step.a, step.b):
            idx = None
            for pos in range(len(pool) - 1, -1, -1):
                if pool[pos][0] == value and pool[pos][2]:
                    idx = pos
                    break
            if idx is None:
                for pos, entry in enumerate(pool):
                    if entry[0] == value and not entry[2]:
                        idx = pos
                        break
            if idx is None:
                raise BrokenProvenance(f"step f{k + 1} consumes {fmt(value)} which no input or prior step supplies")
            v, text, derived = pool.pop(idx)
            parts.append(f"({text})" if derived else text)
        pool.append((step.result, f"{parts[0]} {step.op} {parts[1]}", True))
    if len(pool) != 1:
        raise BrokenProvenance(f"{len(pool)} values left unconsumed")
    return pool[0][1]


_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}


def _eval_node(node, literals: list[Fraction]) -> Fraction:
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return compute(_eval_node(node.left, literals), _BINOPS[type(node.op)],
                       _eval_node(node.right, literals))
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        value = Fraction(str(node.value))
        literals.append(value)
        return value
    raise ParseError(f"unsupported syntax: {ast.dump(node)}")


def evaluate_expression(expr: str) -> tuple[Fraction, list[Fraction]]:
    """Exact value and the literal multiset of a binary arithmetic expression."""
    text = expr.replace("×", "*").replace("÷", "/").replace("−", "-")
    if "=" in text:
        text = text.split("=")[0]
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ParseError(str(exc)) from exc
    literals: list[Fraction] = []
    value = _eval_node(tree.body, literals)
    return value, literals


def verify_expression(numbers: Sequence, expr: str, target=TARGET) -> bool:
    try:
        value, literals = evaluate_expression(expr)
    except ZeroDivisionError:
        return False
    return value == Fraction(target) and Counter(literals) == Counter(Fraction(v) for v in numbers)


# -- environment ----------------------------------------------------------

class Game24Env(Environment):
    task_kind = TaskKind.GAME24

    def __init__(self, numbers: Sequence, target=TARGET):
        self.numbers = tuple(sorted(Fraction(v) for v in numbers))
        self.target = Fraction(target)

    @property
    def initial_state(self) -> G24State:
        return G24State(self.numbers, self.target)

    def check_state(self, state):
        if not isinstance(state, G24State) or not 1 <= len(state.numbers) <= len(self.numbers):
            raise UnknownState(repr(state))

    def actions(self, state):
        if len(state.numbers) < 2:
            return []
        return propose_actions_joint(state)

    def transition(self, state, action):
        return apply_g24(state, action)

    def goal(self, state):
        return len(state.numbers) == 1 and state.numbers[0] == state.target

    def canonical(self, state):
        return " ".join(exact(v) for v in state.numbers)

    def action_key(self, action):
        return action.key()

    def problem_key(self):
        return self.canonical(self.initial_state)

    def transition_key(self, state, action):
        return (self.canonical(state), action.key())

    def transition_value(self, state, action):
        return apply_g24(state, action).numbers

    def realize(self, state, action, value):
        return G24State(tuple(value), state.target)

    def answer(self, initial_state, steps: Sequence[Step]):
        try:
            return assemble_expression(initial_state.numbers, [s.action for s in steps])
        except BrokenProvenance:
            return None

    def verify_answer(self, answer):
        try:
            return verify_expression(self.numbers, answer, self.target)
        except ParseError:
            return False

    def canonical_answer(self, answer: str) -> str:
        return answer.split("=")[0].strip()

    def reachable(self, state: G24State) -> bool:
        return _reachable(state.numbers, state.target)

    def goal_distance(self, state: G24State) -> int | None:
        return len(state.numbers) - 1 if self.reachable(state) else None
