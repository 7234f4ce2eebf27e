"""Maximum-weight independent set on a path.

Marks use 1 for a chosen element and 2 for an unchosen one; "lexicographically
smallest" therefore prefers choosing early elements whenever that keeps the
optimum.  The DP reconstruction flips ``can_use_next_item`` after every
element, including the last two, so no two adjacent elements are ever chosen.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from reasonlab.core import Environment, InapplicableAction, Step, TaskKind, UnknownState

BRUTE_FORCE_CAP = 24
TRACE_FORMAT_VERSION = 1


class TooLarge(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class MwisInstance:
    input: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "input", tuple(int(v) for v in self.input))
        if len(self.input) < 2:
            raise ValueError("MWIS instances need at least two elements")

    @property
    def n(self) -> int:
        return len(self.input)


@dataclass(frozen=True)
class MwisSolution:
    marks: tuple[int, ...]
    sum: int
    dp: tuple[int, ...] | None = None

    def render(self) -> str:
        return format_marks(self.marks)


def format_marks(marks: Sequence[int]) -> str:
    return "[" + ", ".join(str(m) for m in marks) + "]"


def fill_dp(arr: Sequence[int]) -> list[int]:
    n = len(arr)
    dp = [0] * n
    dp[n - 1] = max(arr[n - 1], 0)
    dp[n - 2] = max(arr[n - 1], arr[n - 2], 0)
    for i in range(n - 3, -1, -1):
        dp[i] = max(dp[i + 1], arr[i] + dp[i + 2], 0)
    return dp


def _select(arr: Sequence[int], dp: Sequence[int], i: int, can_use: bool) -> bool:
    n = len(arr)
    if i <= n - 3:
        return can_use and dp[i] == arr[i] + dp[i + 2]
    return can_use and dp[i] == arr[i]


def mwis_dp_solve(inst: MwisInstance) -> MwisSolution:
    arr = inst.input
    dp = fill_dp(arr)
    marks = []
    can_use = True
    for i in range(len(arr)):
        chosen = _select(arr, dp, i, can_use)
        marks.append(1 if chosen else 2)
        can_use = not chosen
    total = sum(a for a, m in zip(arr, marks) if m == 1)
    return MwisSolution(tuple(marks), total, tuple(dp))


def mwis_brute_force(inst: MwisInstance) -> MwisSolution:
    """Enumerate every mark array in lexicographic order; keep the first best."""
    n = inst.n
    if n > BRUTE_FORCE_CAP:
        raise TooLarge(f"brute force is capped at n={BRUTE_FORCE_CAP}, got {n}")
    best = None
    best_sum = None
    for marks in itertools.product((1, 2), repeat=n):
        if any(marks[i] == 1 and marks[i + 1] == 1 for i in range(n - 1)):
            continue
        s = sum(a for a, m in zip(inst.input, marks) if m == 1)
        if best_sum is None or s > best_sum:
            best, best_sum = marks, s
    return MwisSolution(best, best_sum)


# -- traces ---------------------------------------------------------------

class TraceStyle(str, enum.Enum):
    IMPLICIT = "implicit"
    EXPLICIT = "explicit"


_RECONSTRUCT_INTRO = (
    "Finally, we reconstruct the lexicographically smallest subsequence that fulfills "
    'the task objective by selecting numbers as follows. We store the result on a list named "output".'
)


def _dp_line(arr, dp, i, style: TraceStyle) -> str:
    n = len(arr)
    if i == n - 1:
        return f"dp[{i}] = max(input[{i}], 0) = max({arr[i]}, 0) = {dp[i]}"
    if i == n - 2:
        return (f"dp[{i}] = max(input[{i}], input[{i + 1}], 0) = "
                f"max({arr[i]}, {arr[i + 1]}, 0) = {dp[i]}")
    line = (f"dp[{i}] = max(dp[{i + 1}], input[{i}] + dp[{i + 2}], 0) = "
            f"max({dp[i + 1]}, {arr[i]} + {dp[i + 2]}, 0)")
    if style is TraceStyle.EXPLICIT:
        line += f" = max({dp[i + 1]}, {arr[i] + dp[i + 2]}, 0)"
    return line + f" = {dp[i]}"


def _reconstruct_line(arr, dp, i, can_use: bool, style: TraceStyle) -> str:
    n = len(arr)
    chosen = _select(arr, dp, i, can_use)
    mark = 1 if chosen else 2
    tail = i >= n - 2
    if style is TraceStyle.IMPLICIT:
        if tail:
            lhs = f"dp[{i}] {{}} input[{i}] ({dp[i]} {{}} {arr[i]})"
        else:
            lhs = f"dp[{i}] {{}} input[{i}] + dp[{i + 2}] ({dp[i]} {{}} {arr[i]} + {dp[i + 2]})"
        if chosen:
            text = f"Since {lhs.format('==', '==')} and can_use_next_item == True, we store output[{i}] = 1."
        else:
            text = f"Since {lhs.format('!=', '!=')} or can_use_next_item == False, we store output[{i}] = 2."
    elif not can_use:
        text = f"Since can_use_next_item == False, we store output[{i}] = 2."
    elif tail:
        rel = "==" if chosen else "!="
        text = f"Since dp[{i}] = {dp[i]}, input[{i}] = {arr[i]}, dp[{i}] {rel} input[{i}]"
        text += (" and can_use_next_item == True, we store output[{i}] = 1." if chosen
                 else ", we store output[{i}] = 2.").format(i=i)
    else:
        s = arr[i] + dp[i + 2]
        text = f"Since dp[{i}]={dp[i]}, input[{i}]={arr[i]}, dp[{i + 2}]={dp[i + 2]}, input[{i}] + dp[{i + 2}] = {s}"
        if chosen:
            text += f" == {dp[i]} = dp[{i}] and can_use_next_item == True, we store output[{i}] = 1."
        else:
            text += f" != {dp[i]} = dp[{i}], we store output[{i}] = 2."
    if i != n - 1:
        text += f" We update can_use_next_item = {'False' if mark == 1 else 'True'}."
    return text


def emit_mwis_trace(inst: MwisInstance, style: TraceStyle | str = TraceStyle.EXPLICIT) -> str:
    """Render the worked DP solution in the demonstration format."""
    style = TraceStyle(style)
    arr = inst.input
    n = len(arr)
    dp = fill_dp(arr)
    lines = [f"Let's solve input = {format_marks(arr)}.", ""]
    if style is TraceStyle.EXPLICIT:
        lines.append(f"There are {n} numbers in the input sequence, so we will use a list of size {n} "
                     "to store the dynamic programming values. We initialize all values to 0.")
    lines += [_dp_line(arr, dp, i, style) for i in range(n - 1, -1, -1)]
    lines += ["", _RECONSTRUCT_INTRO, "", "Let can_use_next_item = True."]
    can_use = True
    marks = []
    for i in range(n):
        lines.append(_reconstruct_line(arr, dp, i, can_use, style))
        chosen = _select(arr, dp, i, can_use)
        marks.append(1 if chosen else 2)
        can_use = not chosen
    lines += ["", f"Reconstructing all together, output={format_marks(marks)}."]
    return "\n".join(lines) + "\n"


_OUTPUT_RE = re.compile(r"output=\[([^\]]*)\]")


def parse_trace_output(text: str) -> tuple[int, ...]:
    """Marks from the last ``output=[...]`` occurrence in a trace."""
    found = _OUTPUT_RE.findall(text)
    if not found:
        raise ValueError("trace has no output=[...] line")
    return tuple(int(t) for t in found[-1].split(","))


# -- trace environment ----------------------------------------------------

@dataclass(frozen=True)
class MwisTraceState:
    input: tuple[int, ...]
    dp: tuple[int | None, ...]
    output: tuple[int, ...] = ()
    can_use: bool = True


@dataclass(frozen=True, order=True)
class MwisAction:
    kind: str  # "dp" or "out"
    index: int

    def __str__(self):
        # zero-padded so lexicographic order matches the fixed line order
        return f"{self.kind}:{self.index:04d}"


class MwisEnv(Environment):
    """One action per trace line: fill dp right-to-left, then emit marks left-to-right."""

    task_kind = TaskKind.MWIS

    def __init__(self, inst: MwisInstance):
        self.inst = inst

    @property
    def initial_state(self) -> MwisTraceState:
        return MwisTraceState(self.inst.input, (None,) * self.inst.n)

    def check_state(self, state):
        if not isinstance(state, MwisTraceState) or len(state.dp) != len(state.input):
            raise UnknownState(repr(state))

    def _next(self, state: MwisTraceState) -> MwisAction | None:
        n = len(state.input)
        missing = [i for i, v in enumerate(state.dp) if v is None]
        if missing:
            return MwisAction("dp", max(missing))
        if len(state.output) < n:
            return MwisAction("out", len(state.output))
        return None

    def actions(self, state):
        nxt = self._next(state)
        return [nxt] if nxt is not None else []

    def transition(self, state, action):
        if action != self._next(state):
            raise InapplicableAction(action, f"next trace line is {self._next(state)}")
        return self.realize(state, action, self.transition_value(state, action))

    def transition_value(self, state, action) -> int:
        arr, dp = state.input, state.dp
        i = action.index
        if action.kind == "dp":
            return fill_dp_step(arr, dp, i)
        return 1 if _select(arr, dp, i, state.can_use) else 2

    def realize(self, state, action, value):
        if action.kind == "dp":
            dp = list(state.dp)
            dp[action.index] = value
            return MwisTraceState(state.input, tuple(dp), state.output, state.can_use)
        return MwisTraceState(state.input, state.dp, state.output + (value,), value != 1)

    def transition_key(self, state, action):
        arr, dp, i = state.input, state.dp, action.index
        n = len(arr)
        if action.kind == "dp":
            if i == n - 1:
                return ("dp1", arr[i])
            if i == n - 2:
                return ("dp2", arr[i], arr[i + 1])
            return ("dp3", dp[i + 1], arr[i], dp[i + 2])
        if i >= n - 2:
            return ("out_tail", dp[i], arr[i], state.can_use)
        return ("out", dp[i], arr[i], dp[i + 2], state.can_use)

    def policy_key(self, state):
        return (tuple(v is not None for v in state.dp), len(state.output))

    def goal(self, state):
        return len(state.output) == len(state.input)

    def goal_distance(self, state):
        return sum(v is None for v in state.dp) + len(state.input) - len(state.output)

    def canonical(self, state):
        dp = ",".join("_" if v is None else str(v) for v in state.dp)
        return f"in={list(state.input)};dp=[{dp}];out={list(state.output)};can={state.can_use}"

    def problem_key(self):
        return self.inst.input

    def answer(self, initial_state, steps: Sequence[Step]):
        last = steps[-1].next_state if steps else initial_state
        return format_marks(last.output) if self.goal(last) else None

    def canonical_answer(self, answer: str) -> str:
        return format_marks(int(t) for t in re.findall(r"-?\d+", answer))

    def verify_answer(self, answer):
        return self.canonical_answer(answer) == mwis_dp_solve(self.inst).render()


def fill_dp_step(arr: Sequence[int], dp: Sequence[int | None], i: int) -> int:
    n = len(arr)
    if i == n - 1:
        return max(arr[i], 0)
    if i == n - 2:
        return max(arr[n - 1], arr[n - 2], 0)
    if dp[i + 1] is None or dp[i + 2] is None:
        raise InapplicableAction(MwisAction("dp", i), f"dp[{i + 1}] and dp[{i + 2}] must be known")
    return max(dp[i + 1], arr[i] + dp[i + 2], 0)


# -- auxiliary oracles ----------------------------------------------------

class AuxKind(str, enum.Enum):
    MAX = "max"
    RAIN_WATER = "rain_water"
    FIXED_FORMULA = "fixed_formula"


def trapped_rain_water(heights: Sequence[int]) -> int:
    left, right = 0, len(heights) - 1
    left_max = right_max = 0
    water = 0
    while left < right:
        if heights[left] < heights[right]:
            left_max = max(left_max, heights[left])
            water += left_max - heights[left]
            left += 1
        else:
            right_max = max(right_max, heights[right])
            water += right_max - heights[right]
            right -= 1
    return water


def fixed_formula(values: Sequence[int | Fraction]) -> Fraction:
    """(v1*v2 + v1*v3 + v1*v3/v5 + v1*v2/v4) * v7 / v6, exactly."""
    if len(values) != 7:
        raise DomainError(f"fixed formula takes 7 values, got {len(values)}")
    v1, v2, v3, v4, v5, v6, v7 = (Fraction(v) for v in values)
    for name, v in (("v4", v4), ("v5", v5), ("v6", v6)):
        if v == 0:
            raise DomainError(f"{name} must be nonzero")
    return (v1 * v2 + v1 * v3 + v1 * v3 / v5 + v1 * v2 / v4) * v7 / v6


def aux_oracle(kind: AuxKind | str, values: Sequence[int]):
    kind = AuxKind(kind)
    if kind is AuxKind.MAX:
        return max(values)
    if kind is AuxKind.RAIN_WATER:
        return trapped_rain_water(values)
    return fixed_formula(values)
