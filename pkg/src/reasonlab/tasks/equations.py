"""Word-problem equation systems and the linear-time forward-chaining solver.

A system has named variables, some known up front, and equations of the form
``lhs = expression``.  Expressions are small trees over variables, rational
constants and ``+ - * /``.  An optional modulus reduces every equation's value,
which keeps the synthetic learning family inside a fixed value range.

JSON schema (one object per system)::

    {"variables": ["leah", "sister", ...],
     "known": {"leah": "32"},                      # rationals as strings
     "equations": [{"lhs": "sister", "rhs": "leah + 10"}, ...],
     "target": "left",
     "modulus": null,
     "answer": "39"}                                # optional, oracle value
"""

from __future__ import annotations

import ast
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from reasonlab.core import Environment, InapplicableAction, Step, TaskKind, UnknownState


class InvalidSystem(ValueError):
    pass


class Unsolvable(RuntimeError):
    pass


class DivisionByZero(ZeroDivisionError):
    def __init__(self, equation: "Equation"):
        super().__init__(f"division by zero in {equation.render()}")
        self.equation = equation


class GenerationFailed(RuntimeError):
    pass


# -- expressions ----------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, BinOp]
OPS = ("+", "-", "*", "/")
_AST_OPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def parse_expr(text: str) -> Expr:
    try:
        tree = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise InvalidSystem(f"cannot parse {text!r}") from exc

    def conv(node) -> Expr:
        if isinstance(node, ast.BinOp) and type(node.op) in _AST_OPS:
            return BinOp(_AST_OPS[type(node.op)], conv(node.left), conv(node.right))
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return Const(Fraction(str(node.value)))
        if isinstance(node, ast.Name):
            return Var(node.id)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub) and isinstance(node.operand, ast.Constant):
            return Const(-Fraction(str(node.operand.value)))
        raise InvalidSystem(f"unsupported syntax in {text!r}")

    return conv(tree)


def fmt_value(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def render_expr(e: Expr, parent_prec: int = 0, right: bool = False) -> str:
    if isinstance(e, Const):
        text = fmt_value(e.value)
        return f"({text})" if (e.value < 0 or e.value.denominator != 1) and parent_prec else text
    if isinstance(e, Var):
        return e.name
    prec = _PREC[e.op]
    text = f"{render_expr(e.left, prec)} {e.op} {render_expr(e.right, prec, True)}"
    if prec < parent_prec or (right and prec == parent_prec):
        return f"({text})"
    return text


def expr_vars(e: Expr) -> list[str]:
    """Variables in left-to-right order of occurrence, with repeats."""
    if isinstance(e, Var):
        return [e.name]
    if isinstance(e, BinOp):
        return expr_vars(e.left) + expr_vars(e.right)
    return []


def expr_size(e: Expr) -> int:
    return 1 if not isinstance(e, BinOp) else 1 + expr_size(e.left) + expr_size(e.right)


def evaluate(e: Expr, env: Mapping[str, Fraction]) -> Fraction:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    a, b = evaluate(e.left, env), evaluate(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b == 0:
        raise ZeroDivisionError
    return a / b


def substitute(e: Expr, env: Mapping[str, Fraction]) -> Expr:
    if isinstance(e, Var) and e.name in env:
        return Const(env[e.name])
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, env), substitute(e.right, env))
    return e


def shape(e: Expr) -> str:
    """The expression with every variable replaced by ``_``: the reusable component."""
    if isinstance(e, Var):
        return "_"
    if isinstance(e, Const):
        return fmt_value(e.value)
    return f"({shape(e.left)} {e.op} {shape(e.right)})"


# -- systems --------------------------------------------------------------

@dataclass(frozen=True)
class Equation:
    lhs: str
    rhs: Expr

    def render(self) -> str:
        return f"{self.lhs} = {render_expr(self.rhs)}"


@dataclass(frozen=True)
class EquationSystem:
    variables: tuple[str, ...]
    known: Mapping[str, Fraction]
    equations: tuple[Equation, ...]
    target: str
    modulus: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "known", {k: Fraction(v) for k, v in self.known.items()})
        object.__setattr__(self, "equations", tuple(self.equations))
        names = set(self.variables)
        if len(names) != len(self.variables):
            raise InvalidSystem("duplicate variable names")
        if self.target not in names:
            raise InvalidSystem(f"target {self.target!r} is not a variable")
        lhs_seen = set()
        for eq in self.equations:
            if eq.lhs not in names:
                raise InvalidSystem(f"unknown LHS variable {eq.lhs!r}")
            if eq.lhs in self.known or eq.lhs in lhs_seen:
                raise InvalidSystem(f"{eq.lhs} is defined more than once")
            lhs_seen.add(eq.lhs)
            for v in expr_vars(eq.rhs):
                if v not in names:
                    raise InvalidSystem(f"unknown variable {v!r} in {eq.render()}")
        for v in self.known:
            if v not in names:
                raise InvalidSystem(f"unknown known variable {v!r}")
        undefined = names - set(self.known) - lhs_seen
        if undefined:
            raise InvalidSystem(f"unsolvable: {sorted(undefined)} never appear on a LHS")

    @classmethod
    def parse(cls, variables, known, equations: Iterable[str], target: str, modulus=None) -> "EquationSystem":
        eqs = []
        for text in equations:
            lhs, _, rhs = text.partition("=")
            eqs.append(Equation(lhs.strip(), parse_expr(rhs)))
        return cls(tuple(variables), dict(known), tuple(eqs), target, modulus)

    @property
    def total_length(self) -> int:
        """L: total number of symbols across all equations (LHS counts one)."""
        return sum(1 + expr_size(eq.rhs) for eq in self.equations)

    def reduce(self, value: Fraction) -> Fraction:
        if self.modulus is None:
            return value
        if value.denominator != 1:
            raise InvalidSystem("modular systems must stay integral")
        return Fraction(value.numerator % self.modulus)

    def eval_equation(self, eq: Equation, values: Mapping[str, Fraction]) -> Fraction:
        try:
            return self.reduce(evaluate(eq.rhs, values))
        except ZeroDivisionError:
            raise DivisionByZero(eq) from None

    def to_json(self, answer: Fraction | None = None) -> dict:
        data = {
            "variables": list(self.variables),
            "known": {k: fmt_value(v) for k, v in self.known.items()},
            "equations": [{"lhs": eq.lhs, "rhs": render_expr(eq.rhs)} for eq in self.equations],
            "target": self.target,
            "modulus": self.modulus,
        }
        if answer is not None:
            data["answer"] = fmt_value(answer)
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "EquationSystem":
        try:
            return cls.parse(data["variables"], {k: Fraction(v) for k, v in data["known"].items()},
                             [f"{e['lhs']} = {e['rhs']}" for e in data["equations"]],
                             data["target"], data.get("modulus"))
        except (KeyError, TypeError) as exc:
            raise InvalidSystem(f"bad equation-system record: {exc}") from exc


@dataclass
class ChainResult:
    value: Fraction
    order: list[int]
    values: dict[str, Fraction]
    ops: int


def forward_chain_solve(system: EquationSystem) -> tuple[Fraction, list[int]]:
    res = forward_chain(system)
    return res.value, res.order


def forward_chain(system: EquationSystem) -> ChainResult:
    """Ready-queue forward chaining; ``ops`` counts primitive bookkeeping steps."""
    ops = 0
    index = {v: j for j, v in enumerate(system.variables)}
    m = len(system.equations)
    numvars = [0] * m
    lhslist = [index[eq.lhs] for eq in system.equations]
    equationlist: list[list[int]] = [[] for _ in system.variables]
    for i, eq in enumerate(system.equations):
        ops += 1
        for name in dict.fromkeys(expr_vars(eq.rhs)):
            ops += 1
            if name not in system.known:
                numvars[i] += 1
                equationlist[index[name]].append(i)
    values = dict(system.known)
    queue = deque(i for i in range(m) if numvars[i] == 0)
    ops += m
    order = []
    while queue:
        i = queue.popleft()
        eq = system.equations[i]
        values[eq.lhs] = system.eval_equation(eq, values)
        ops += 1 + expr_size(eq.rhs)
        order.append(i)
        for k in equationlist[lhslist[i]]:
            ops += 1
            numvars[k] -= 1
            if numvars[k] == 0:
                queue.append(k)
    if system.target not in values:
        raise Unsolvable(f"target {system.target} never becomes ready")
    return ChainResult(values[system.target], order, values, ops)


def substitution_oracle(system: EquationSystem) -> Fraction:
    """Sweep all equations until no new variable is determined."""
    values = dict(system.known)
    changed = True
    while changed:
        changed = False
        for eq in system.equations:
            if eq.lhs in values:
                continue
            if all(v in values for v in expr_vars(eq.rhs)):
                values[eq.lhs] = system.eval_equation(eq, values)
                changed = True
    if system.target not in values:
        raise Unsolvable(system.target)
    return values[system.target]


def is_topological(system: EquationSystem, order: Sequence[int]) -> bool:
    known = set(system.known)
    for i in order:
        eq = system.equations[i]
        if not all(v in known for v in expr_vars(eq.rhs)):
            return False
        known.add(eq.lhs)
    return True


def cot_trace(system: EquationSystem) -> str:
    """One line per fired equation, then ``So the answer is <value>.``"""
    res = forward_chain(system)
    lines = [f"{v} = {fmt_value(system.known[v])}." for v in system.variables if v in system.known]
    values = dict(system.known)
    for i in res.order:
        eq = system.equations[i]
        val = res.values[eq.lhs]
        sub = render_expr(substitute(eq.rhs, values))
        parts = [eq.lhs, render_expr(eq.rhs)]
        if sub != parts[-1]:
            parts.append(sub)
        if fmt_value(val) != parts[-1]:
            parts.append(fmt_value(val) if system.modulus is None else f"{fmt_value(val)} (mod {system.modulus})")
        lines.append("So " + " = ".join(parts) + ".")
        values[eq.lhs] = val
    lines.append(f"So the answer is {fmt_value(res.value)}.")
    return "\n".join(lines) + "\n"


# -- generator ------------------------------------------------------------

RULES = ("multiplier", "difference", "per_unit", "sum", "current")
# RHS variable slots each general rule consumes
RULE_ARITY = {"multiplier": 1, "difference": 1, "per_unit": 2, "sum": 2, "current": 3}


def _rule_expr(rule: str, names: list[str], rng: random.Random) -> Expr:
    if rule == "multiplier":
        m = rng.choice([Fraction(2), Fraction(3), Fraction(4), Fraction(1, 2), Fraction(1, 3)])
        return BinOp("*", Var(names[0]), Const(m))
    if rule == "difference":
        return BinOp("+", Var(names[0]), Const(Fraction(rng.randint(1, 9))))
    if rule == "per_unit":
        return BinOp("*", Var(names[0]), Var(names[1]))
    if rule == "sum":
        e: Expr = Var(names[0])
        for n in names[1:]:
            e = BinOp("+", e, Var(n))
        return e
    return BinOp("+", BinOp("-", Var(names[0]), Var(names[1])), Var(names[2]))


def generate_equation_task(n: int, k: int, rule_mix: Mapping[str, float] | None = None, seed: int = 0,
                           max_retries: int = 200) -> tuple[EquationSystem, Fraction]:
    """Random solvable system over ``n`` variables with every value an integer in [0, k)."""
    if n < 2 or k < 2:
        raise ValueError("need n >= 2 and k >= 2")
    mix = dict(rule_mix or {r: 1.0 for r in RULES})
    if any(r not in RULES for r in mix):
        raise ValueError(f"unknown rules in mix: {sorted(set(mix) - set(RULES))}")
    rng = random.Random(seed)
    names = [f"v{j}" for j in range(n)]
    n_known = max(1, n // 3)
    values = {v: Fraction(rng.randrange(1, k)) for v in names[:n_known]}
    known = dict(values)
    equations = []
    rules = sorted(mix)
    weights = [mix[r] for r in rules]
    for j in range(n_known, n):
        for _ in range(max_retries):
            rule = rng.choices(rules, weights)[0]
            arity = RULE_ARITY[rule]
            pool = names[:j]
            if rule == "sum":
                arity = min(len(pool), rng.choice([2, 3]))
            if len(pool) < arity:
                continue
            operands = rng.sample(pool, arity)
            expr = _rule_expr(rule, operands, rng)
            val = evaluate(expr, values)
            if val.denominator == 1 and 0 <= val < k:
                values[names[j]] = val
                equations.append(Equation(names[j], expr))
                break
        else:
            raise GenerationFailed(f"no rule produced an in-range value for {names[j]} (k={k})")
    system = EquationSystem(tuple(names), known, tuple(equations), names[-1])
    return system, values[names[-1]]


def modular_chain_family(n_inputs: int = 4, k: int = 10, ops: Sequence[str] | None = None):
    """Factory for the fixed-structure learning family.

    Inputs ``x1..xN`` are free in [0, k); ``y1 = x1 op x2``, ``y_i = y_{i-1} op x_{i+1}``,
    all mod k.  Returns a function mapping an input tuple to its EquationSystem.
    """
    ops = list(ops or (["+", "*"] * n_inputs)[: n_inputs - 1])
    if len(ops) != n_inputs - 1:
        raise ValueError("need one operator per chain step")
    xs = [f"x{i + 1}" for i in range(n_inputs)]
    ys = [f"y{i + 1}" for i in range(n_inputs - 1)]
    eqs = []
    prev = xs[0]
    for i, op in enumerate(ops):
        eqs.append(Equation(ys[i], BinOp(op, Var(prev), Var(xs[i + 1]))))
        prev = ys[i]
    variables = tuple(xs + ys)

    def build(inputs: Sequence[int]) -> EquationSystem:
        if len(inputs) != n_inputs or not all(0 <= v < k for v in inputs):
            raise ValueError(f"inputs must be {n_inputs} values in [0, {k})")
        return EquationSystem(variables, dict(zip(xs, map(Fraction, inputs))), tuple(eqs), ys[-1], k)

    return build


# -- environment ----------------------------------------------------------

@dataclass(frozen=True)
class EqState:
    values: tuple[tuple[str, Fraction], ...]

    def as_dict(self) -> dict[str, Fraction]:
        return dict(self.values)


class EquationEnv(Environment):
    """State is the set of determined variables; an action fires one ready equation."""

    task_kind = TaskKind.EQUATIONS

    def __init__(self, system: EquationSystem):
        self.system = system
        self._lhs_index = {eq.lhs: i for i, eq in enumerate(system.equations)}

    def _state(self, values: Mapping[str, Fraction]) -> EqState:
        order = {v: j for j, v in enumerate(self.system.variables)}
        return EqState(tuple(sorted(values.items(), key=lambda kv: order[kv[0]])))

    @property
    def initial_state(self):
        return self._state(self.system.known)

    def check_state(self, state):
        if not isinstance(state, EqState) or any(v not in self._lhs_index and v not in self.system.known
                                                 for v, _ in state.values):
            raise UnknownState(repr(state))

    def actions(self, state):
        have = state.as_dict()
        return [i for i, eq in enumerate(self.system.equations)
                if eq.lhs not in have and all(v in have for v in expr_vars(eq.rhs))]

    def action_key(self, action):
        return f"eq{action:04d}"

    def transition(self, state, action):
        if action not in self.actions(state):
            raise InapplicableAction(action, "equation is not ready or already fired")
        return self.realize(state, action, self.transition_value(state, action))

    def transition_value(self, state, action):
        return self.system.eval_equation(self.system.equations[action], state.as_dict())

    def realize(self, state, action, value):
        values = state.as_dict()
        values[self.system.equations[action].lhs] = Fraction(value)
        return self._state(values)

    def goal(self, state):
        return self.system.target in state.as_dict()

    def goal_distance(self, state):
        if self.goal(state):
            return 0
        # equations still needed to derive the target
        have = state.as_dict()
        need, stack = set(), [self.system.target]
        while stack:
            v = stack.pop()
            if v in have or v in need:
                continue
            need.add(v)
            stack.extend(expr_vars(self.system.equations[self._lhs_index[v]].rhs))
        return len(need)

    def canonical(self, state):
        return ";".join(f"{k}={fmt_value(v)}" for k, v in state.values)

    def problem_key(self):
        return (tuple(eq.render() for eq in self.system.equations),
                tuple(self.system.known.get(v) for v in self.system.variables))

    def policy_key(self, state):
        have = state.as_dict()
        return tuple(v in have for v in self.system.variables)

    def transition_key(self, state, action):
        eq = self.system.equations[action]
        have = state.as_dict()
        return (shape(eq.rhs), self.system.modulus) + tuple(have[v] for v in expr_vars(eq.rhs))

    def answer(self, initial_state, steps: Sequence[Step]):
        last = steps[-1].next_state if steps else initial_state
        have = last.as_dict()
        return fmt_value(have[self.system.target]) if self.system.target in have else None

    def canonical_answer(self, answer: str) -> str:
        try:
            return fmt_value(Fraction(answer.strip().rstrip(".")))
        except (ValueError, ZeroDivisionError):
            return answer.strip()

    def verify_answer(self, answer):
        return self.canonical_answer(answer) == fmt_value(substitution_oracle(self.system))
