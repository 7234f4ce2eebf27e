"""Blocksworld: stacks of coloured blocks, one hand, four action schemas.

Two views of a configuration are used.  A description state keeps the stacks
in the order they are listed (this is what :func:`count_state_descriptions`
counts).  :class:`BwState` compares by its physical canonical form, with stacks
sorted by bottom block, so search never distinguishes two listings of the same
table.

Natural-language rendering orders blocks by a fixed object order (red, blue,
orange, yellow, white, then other colours, then any remaining names
alphabetically); clauses are grouped as clear, hand, on-top-of, on-the-table,
joined by commas with a final " and ".
"""

from __future__ import annotations

import itertools
import math
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from reasonlab.core import Environment, InapplicableAction, Step, TaskKind, UnknownState

BLOCK_ORDER = ("red", "blue", "orange", "yellow", "white", "purple", "cyan", "brown",
               "black", "green", "pink", "gray")
MAX_PLAN_BLOCKS = 8


class MalformedDescription(ValueError):
    pass


class PreconditionViolated(InapplicableAction):
    pass


class Unreachable(RuntimeError):
    pass


def block_rank(name: str) -> tuple:
    return (0, BLOCK_ORDER.index(name), "") if name in BLOCK_ORDER else (1, 0, name)


# -- propositions ---------------------------------------------------------

def On(x: str, y: str) -> str:
    return f"On({x},{y})"


def OnTable(x: str) -> str:
    return f"OnTable({x})"


def Clear(x: str) -> str:
    return f"Clear({x})"


def Holding(x: str) -> str:
    return f"Holding({x})"


HAND_EMPTY = "HandEmpty"


@dataclass(frozen=True, eq=False)
class BwState:
    stacks: tuple[tuple[str, ...], ...]
    holding: str | None = None

    def __post_init__(self):
        stacks = tuple(tuple(s) for s in self.stacks if len(s) > 0)
        object.__setattr__(self, "stacks", stacks)
        blocks = [b for s in stacks for b in s] + ([self.holding] if self.holding else [])
        if len(blocks) != len(set(blocks)):
            raise UnknownState(f"a block appears more than once: {blocks}")

    @property
    def blocks(self) -> tuple[str, ...]:
        found = [b for s in self.stacks for b in s] + ([self.holding] if self.holding else [])
        return tuple(sorted(found, key=block_rank))

    def physical(self) -> "BwState":
        return BwState(tuple(sorted(self.stacks, key=lambda s: block_rank(s[0]))), self.holding)

    def key(self) -> tuple:
        return (tuple(sorted(self.stacks, key=lambda s: block_rank(s[0]))), self.holding)

    def __eq__(self, other):
        return isinstance(other, BwState) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    # derived relations
    def below(self) -> dict[str, str | None]:
        """Block -> the block it sits on (None for the table)."""
        out = {}
        for s in self.stacks:
            for k, b in enumerate(s):
                out[b] = s[k - 1] if k else None
        return out

    def clear_blocks(self) -> list[str]:
        return sorted((s[-1] for s in self.stacks), key=block_rank)

    def is_clear(self, x: str) -> bool:
        return any(s[-1] == x for s in self.stacks)

    def propositions(self) -> frozenset[str]:
        props = set()
        for s in self.stacks:
            props.add(OnTable(s[0]))
            props.add(Clear(s[-1]))
            for lower, upper in zip(s, s[1:]):
                props.add(On(upper, lower))
        props.add(Holding(self.holding) if self.holding else HAND_EMPTY)
        return frozenset(props)

    def render(self) -> str:
        return render_state(self)


# -- actions --------------------------------------------------------------

SCHEMAS = ("pickup", "putdown", "stack", "unstack")


@dataclass(frozen=True)
class BwAction:
    schema: str
    x: str
    y: str | None = None

    def __post_init__(self):
        if self.schema not in SCHEMAS:
            raise ValueError(f"unknown schema {self.schema!r}")
        if (self.y is None) != (self.schema in ("pickup", "putdown")):
            raise ValueError(f"{self.schema} takes {'one' if self.y is None else 'two'} blocks")

    def preconditions(self) -> tuple[str, ...]:
        x, y = self.x, self.y
        return {
            "pickup": (OnTable(x), Clear(x), HAND_EMPTY),
            "putdown": (Holding(x),),
            "stack": (Holding(x), Clear(y)),
            "unstack": (On(x, y), Clear(x), HAND_EMPTY),
        }[self.schema]

    def add_effects(self) -> tuple[str, ...]:
        x, y = self.x, self.y
        return {
            "pickup": (Holding(x),),
            "putdown": (OnTable(x), Clear(x), HAND_EMPTY),
            "stack": (On(x, y), Clear(x), HAND_EMPTY),
            "unstack": (Holding(x), Clear(y)),
        }[self.schema]

    def delete_effects(self) -> tuple[str, ...]:
        x, y = self.x, self.y
        return {
            "pickup": (OnTable(x), Clear(x), HAND_EMPTY),
            "putdown": (Holding(x),),
            "stack": (Holding(x), Clear(y)),
            "unstack": (On(x, y), Clear(x), HAND_EMPTY),
        }[self.schema]

    def render(self) -> str:
        """Plan-line form, e.g. ``unstack the orange block from on top of the blue block``."""
        if self.schema == "pickup":
            return f"pick up the {self.x} block"
        if self.schema == "putdown":
            return f"put down the {self.x} block"
        if self.schema == "stack":
            return f"stack the {self.x} block on top of the {self.y} block"
        return f"unstack the {self.x} block from on top of the {self.y} block"

    def sentence(self) -> str:
        text = self.render()
        return text[0].upper() + text[1:] + "."

    def __str__(self):
        return f"{self.schema}({self.x}{',' + self.y if self.y else ''})"


def grounded_actions(blocks: Sequence[str]) -> list[BwAction]:
    """All 2K + 2K(K-1) groundings."""
    acts = []
    for x in blocks:
        acts += [BwAction("pickup", x), BwAction("putdown", x)]
        for y in blocks:
            if y != x:
                acts += [BwAction("stack", x, y), BwAction("unstack", x, y)]
    return acts


def failed_precondition(state: BwState, action: BwAction) -> str | None:
    props = state.propositions()
    for p in action.preconditions():
        if p not in props:
            return p
    return None


def apply_bw(state: BwState, action: BwAction) -> BwState:
    """Apply add/delete effects; raise :class:`PreconditionViolated` naming the first failed one."""
    missing = failed_precondition(state, action)
    if missing is not None:
        raise PreconditionViolated(action, missing)
    stacks = [list(s) for s in state.stacks]
    x, y = action.x, action.y
    if action.schema in ("pickup", "unstack"):
        for s in stacks:
            if s[-1] == x:
                s.pop()
        return BwState(tuple(tuple(s) for s in stacks), x)
    if action.schema == "putdown":
        stacks.append([x])
    else:
        for s in stacks:
            if s[-1] == y:
                s.append(x)
    return BwState(tuple(tuple(s) for s in stacks), None)


def applicable_with_reasons(state: BwState) -> list[tuple[BwAction, tuple[str, ...]]]:
    """Applicable grounded actions, each with the preconditions that make it admissible."""
    out = []
    for action in grounded_actions(state.blocks):
        if failed_precondition(state, action) is None:
            out.append((action, action.preconditions()))
    return sorted(out, key=lambda pair: str(pair[0]))


def proposal_reasoning(state: BwState) -> str:
    """Explain admissibility before listing actions, in the decomposed proposal style."""
    lines = []
    if state.holding:
        h = state.holding
        lines.append(f"Since the {h} block is in the hand, I can only stack the {h} block or put down the {h} block.")
        for b in state.clear_blocks():
            lines.append(f"Since the {b} block is clear, I can stack the {h} block on top of the {b} block.")
    else:
        clear = state.clear_blocks()
        lines.append("Since the hand is empty, I can only unstack a block or pick up a block.")
        below = state.below()
        for b in clear:
            if below[b] is None:
                lines.append(f"Since the {b} block is clear and on the table, I can pick up the {b} block.")
            else:
                lines.append(f"Since the {b} block is clear and on top of the {below[b]} block, "
                             f"I can unstack the {b} block from on top of the {below[b]} block.")
    actions = " ".join(a.sentence() for a, _ in applicable_with_reasons(state))
    return "[REASON] " + " ".join(lines) + "\n[ACTION] " + actions


# -- goals ----------------------------------------------------------------

@dataclass(frozen=True)
class GoalConstraints:
    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        pairs = tuple(tuple(p) for p in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if len(pairs) > 3:
            raise ValueError("at most 3 On constraints")
        uppers = [x for x, _ in pairs]
        lowers = [y for _, y in pairs]
        if len(set(uppers)) != len(uppers) or len(set(lowers)) != len(lowers):
            raise ValueError(f"contradictory goal: {pairs}")
        above = dict(pairs)
        for start in above:
            seen, cur = set(), start
            while cur in above:
                if cur in seen or cur == above[cur]:
                    raise ValueError(f"cyclic goal: {pairs}")
                seen.add(cur)
                cur = above[cur]

    def render(self) -> str:
        return _join([f"the {x} block is on top of the {y} block" for x, y in self.pairs])


def goal_satisfied(state: BwState, goal: GoalConstraints) -> bool:
    below = state.below()
    return all(below.get(x) == y for x, y in goal.pairs)


# -- natural-language grammar ---------------------------------------------

def _join(clauses: Sequence[str]) -> str:
    if len(clauses) <= 1:
        return "".join(clauses)
    return ", ".join(clauses[:-1]) + " and " + clauses[-1]


def render_state(state: BwState) -> str:
    clauses = [f"the {b} block is clear" for b in state.clear_blocks()]
    if state.holding:
        clauses += [f"the {state.holding} block is in the hand", f"the hand is holding the {state.holding} block"]
    else:
        clauses.append("the hand is empty")
    below = state.below()
    upper = sorted((b for b, under in below.items() if under is not None), key=block_rank)
    clauses += [f"the {b} block is on top of the {below[b]} block" for b in upper]
    table = sorted((b for b, under in below.items() if under is None), key=block_rank)
    clauses += [f"the {b} block is on the table" for b in table]
    return _join(clauses)


_CLAUSE_PATTERNS = [
    (re.compile(r"^the (\w+) block is clear$"), "clear"),
    (re.compile(r"^the hand is empty$"), "empty"),
    (re.compile(r"^the (\w+) block is in the hand$"), "inhand"),
    (re.compile(r"^the hand is holding the (\w+) block$"), "holding"),
    (re.compile(r"^the (\w+) block is on top of the (\w+) block$"), "on"),
    (re.compile(r"^the (\w+) block is on the table$"), "table"),
]


def split_clauses(text: str) -> list[str]:
    text = text.strip().rstrip(".").strip()
    if text.lower().startswith("i have that,"):
        text = text[len("i have that,"):]
    parts = re.split(r",\s*(?:and\s+)?|\s+and\s+", text)
    return [p.strip() for p in parts if p.strip()]


def parse_state(text: str) -> BwState:
    on: dict[str, str] = {}
    table: list[str] = []
    clear: set[str] = set()
    held = set()
    empty = False
    for clause in split_clauses(text):
        for pattern, kind in _CLAUSE_PATTERNS:
            m = pattern.match(clause)
            if m:
                break
        else:
            raise MalformedDescription(f"unrecognised clause: {clause!r}")
        if kind == "clear":
            clear.add(m.group(1))
        elif kind == "empty":
            empty = True
        elif kind in ("inhand", "holding"):
            held.add(m.group(1))
        elif kind == "on":
            if m.group(1) in on:
                raise MalformedDescription(f"{m.group(1)} is on two blocks")
            on[m.group(1)] = m.group(2)
        else:
            table.append(m.group(1))
    if len(held) > 1 or (held and empty):
        raise MalformedDescription("inconsistent hand clauses")
    holding = held.pop() if held else None
    above = {}
    for upper, lower in on.items():
        if lower in above:
            raise MalformedDescription(f"two blocks on top of {lower}")
        above[lower] = upper
    stacks = []
    placed = set()
    for base in sorted(table, key=block_rank):
        stack = [base]
        while stack[-1] in above:
            stack.append(above[stack[-1]])
            if len(stack) > len(on) + 1:
                raise MalformedDescription("cyclic on-top-of clauses")
        stacks.append(tuple(stack))
        placed.update(stack)
    if set(on) - placed:
        raise MalformedDescription(f"blocks not grounded on the table: {sorted(set(on) - placed)}")
    state = BwState(tuple(stacks), holding)
    if clear and set(clear) != set(state.clear_blocks()):
        raise MalformedDescription(f"clear clauses {sorted(clear)} disagree with the stacks")
    return state


def parse_goal(text: str) -> GoalConstraints:
    pairs = []
    for clause in split_clauses(text):
        m = _CLAUSE_PATTERNS[4][0].match(clause)
        if not m:
            raise MalformedDescription(f"goal clause must be an on-top-of relation: {clause!r}")
        pairs.append((m.group(1), m.group(2)))
    return GoalConstraints(tuple(pairs))


_PLAN_PATTERNS = [
    (re.compile(r"^pick up the (\w+) block$"), "pickup"),
    (re.compile(r"^put down the (\w+) block$"), "putdown"),
    (re.compile(r"^stack the (\w+) block on top of the (\w+) block$"), "stack"),
    (re.compile(r"^unstack the (\w+) block from on top of the (\w+) block$"), "unstack"),
]


def parse_action(line: str) -> BwAction:
    text = line.strip().rstrip(".").lower()
    for pattern, schema in _PLAN_PATTERNS:
        m = pattern.match(text)
        if m:
            return BwAction(schema, *m.groups())
    raise MalformedDescription(f"unrecognised action: {line!r}")


def parse_plan(text: str) -> list[BwAction]:
    actions = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line == "[PLAN END]":
            break
        actions.append(parse_action(line))
    return actions


def render_plan(actions: Iterable[BwAction]) -> str:
    return "\n" + "".join(a.render() + "\n" for a in actions) + "[PLAN END]\n"


# -- counting -------------------------------------------------------------

def count_state_descriptions(k: int) -> int:
    """K! * 2^(K-1): hand-empty descriptions with stacks listed in order."""
    if k < 1:
        raise ValueError("K must be at least 1")
    return math.factorial(k) * 2 ** (k - 1)


def stacking_ways(k: int) -> int:
    """Sum over C(K-1, j): the ways to cut K identical blocks into ordered stacks."""
    return sum(math.comb(k - 1, j) for j in range(k))


def enumerate_descriptions(blocks: Sequence[str]) -> Iterator[tuple[tuple[str, ...], ...]]:
    """Every ordered list of bottom-to-top stacks using all blocks (hand empty)."""
    n = len(blocks)
    for perm in itertools.permutations(blocks):
        for cuts in itertools.product((False, True), repeat=n - 1):
            stacks, cur = [], [perm[0]]
            for b, cut in zip(perm[1:], cuts):
                if cut:
                    stacks.append(tuple(cur))
                    cur = [b]
                else:
                    cur.append(b)
            stacks.append(tuple(cur))
            yield tuple(stacks)


def enumerate_physical_states(blocks: Sequence[str], include_held: bool = True) -> list[BwState]:
    """Distinct physical states; held-block states included unless disabled."""
    seen = set()
    out = []
    for desc in enumerate_descriptions(blocks):
        s = BwState(desc)
        if s not in seen:
            seen.add(s)
            out.append(s)
    if include_held:
        for h in blocks:
            rest = [b for b in blocks if b != h]
            descs = enumerate_descriptions(rest) if rest else [()]
            for desc in descs:
                s = BwState(desc, h)
                if s not in seen:
                    seen.add(s)
                    out.append(s)
    return out


# -- planning -------------------------------------------------------------

def successors(state: BwState) -> list[tuple[BwAction, BwState]]:
    return [(a, apply_bw(state, a)) for a, _ in applicable_with_reasons(state)]


def optimal_plan(init: BwState, goal: GoalConstraints) -> list[BwAction]:
    """Shortest plan by breadth-first search; ties broken by canonical action order."""
    if len(init.blocks) > MAX_PLAN_BLOCKS:
        raise ValueError(f"optimal_plan handles at most {MAX_PLAN_BLOCKS} blocks")
    if goal_satisfied(init, goal):
        return []
    parent: dict[BwState, tuple[BwState, BwAction] | None] = {init: None}
    frontier = deque([init])
    while frontier:
        state = frontier.popleft()
        for action, nxt in successors(state):
            if nxt in parent:
                continue
            parent[nxt] = (state, action)
            if goal_satisfied(nxt, goal):
                plan = []
                cur = nxt
                while parent[cur] is not None:
                    prev, act = parent[cur]
                    plan.append(act)
                    cur = prev
                return plan[::-1]
            frontier.append(nxt)
    raise Unreachable(f"goal {goal.render()} unreachable from {init.render()}")


class BlocksworldEnv(Environment):
    task_kind = TaskKind.BLOCKSWORLD

    def __init__(self, init: BwState, goal: GoalConstraints):
        self.init = init
        self.goal_spec = goal

    @property
    def initial_state(self):
        return self.init

    def check_state(self, state):
        if not isinstance(state, BwState) or set(state.blocks) != set(self.init.blocks):
            raise UnknownState(repr(state))

    def actions(self, state):
        return [a for a, _ in applicable_with_reasons(state)]

    def transition(self, state, action):
        return apply_bw(state, action)

    def goal(self, state):
        return goal_satisfied(state, self.goal_spec)

    def canonical(self, state):
        stacks, held = state.key()
        return "|".join("/".join(s) for s in stacks) + f";hand={held or '-'}"

    def problem_key(self):
        return (self.canonical(self.init), self.goal_spec.pairs)

    def policy_key(self, state):
        return (self.canonical(state), self.goal_spec.pairs)

    def answer(self, initial_state, steps: Sequence[Step]):
        return render_plan(s.action for s in steps)

    def verify_answer(self, answer):
        try:
            state = self.init
            for action in parse_plan(answer):
                state = apply_bw(state, action)
        except (MalformedDescription, InapplicableAction):
            return False
        return self.goal(state)
