"""Independent reference implementations used only by the tests.

None of these import the package's solvers; they re-derive answers by a
different route (exhaustive enumeration, all-pairs relaxation, subset DP,
proposition-set search) so that agreement is meaningful.
"""

from __future__ import annotations

import itertools
import re
import json
from collections import deque
from fractions import Fraction
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    path = FIXTURES / name
    return json.loads(path.read_text()) if name.endswith(".json") else path.read_text()


# -- MWIS ------------------------------------------------------------------

def mwis_exhaustive(arr):
    """(marks, total) over all 2^n choice vectors; marks use 1=chosen, 2=not."""
    best = None
    for choice in itertools.product((1, 2), repeat=len(arr)):  # product order is lexicographic
        if any(a == 1 and b == 1 for a, b in zip(choice, choice[1:])):
            continue
        total = sum(v for v, c in zip(arr, choice) if c == 1)
        if best is None or total > best[1]:
            best = (choice, total)
    return best


# -- Game of 24 ------------------------------------------------------------

def reachable_values(numbers):
    """Subset DP: every value any full-binary-tree expression over the multiset can take."""
    nums = [Fraction(n) for n in numbers]
    n = len(nums)
    vals = {1 << i: {nums[i]} for i in range(n)}
    for mask in range(1, 1 << n):
        if mask in vals:
            continue
        out = set()
        sub = (mask - 1) & mask
        while sub:
            rest = mask ^ sub
            if sub < rest:
                for a in vals[sub]:
                    for b in vals[rest]:
                        out.update((a + b, a - b, b - a, a * b))
                        if b:
                            out.add(a / b)
                        if a:
                            out.add(b / a)
            sub = (sub - 1) & mask
        vals[mask] = out
    return vals[(1 << n) - 1]


def solvable_24(numbers) -> bool:
    return Fraction(24) in reachable_values(numbers)


# -- routes ----------------------------------------------------------------

def floyd_warshall(cities, edges, directed=False):
    inf = float("inf")
    idx = {c: i for i, c in enumerate(cities)}
    n = len(cities)
    d = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for a, b in edges:
        d[idx[a]][idx[b]] = 1
        if not directed:
            d[idx[b]][idx[a]] = 1
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            if dik == inf:
                continue
            di = d[i]
            for j in range(n):
                if dik + dk[j] < di[j]:
                    di[j] = dik + dk[j]
    return {(a, b): d[idx[a]][idx[b]] for a in cities for b in cities}


# -- Blocksworld as raw STRIPS over proposition sets -------------------------

def strips_successors(props: frozenset, blocks):
    """Apply the four schemas by precondition/add/delete sets, written out longhand."""
    out = []
    empty = ("handempty",) in props
    for x in blocks:
        if empty and ("clear", x) in props and ("ontable", x) in props:
            out.append(props - {("clear", x), ("ontable", x), ("handempty",)} | {("holding", x)})
        if ("holding", x) in props:
            out.append(props - {("holding", x)} | {("clear", x), ("ontable", x), ("handempty",)})
        for y in blocks:
            if x == y:
                continue
            if ("holding", x) in props and ("clear", y) in props:
                out.append(props - {("holding", x), ("clear", y)} | {("on", x, y), ("clear", x), ("handempty",)})
            if empty and ("on", x, y) in props and ("clear", x) in props:
                out.append(props - {("on", x, y), ("clear", x), ("handempty",)} | {("holding", x), ("clear", y)})
    return out


def stacks_to_props(stacks, holding=None) -> frozenset:
    props = set()
    for s in stacks:
        props.add(("ontable", s[0]))
        props.add(("clear", s[-1]))
        for lo, hi in zip(s, s[1:]):
            props.add(("on", hi, lo))
    props.add(("holding", holding) if holding else ("handempty",))
    return frozenset(props)


def strips_distance(stacks, goal_pairs, holding=None):
    blocks = sorted({b for s in stacks for b in s} | ({holding} if holding else set()))
    start = stacks_to_props(stacks, holding)
    goal = {("on", x, y) for x, y in goal_pairs}
    dist = {start: 0}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        if goal <= p:
            return dist[p]
        for q in strips_successors(p, blocks):
            if q not in dist:
                dist[q] = dist[p] + 1
                queue.append(q)
    return None


def ordered_stack_lists(blocks):
    """Distinct ordered lists of bottom-to-top stacks, built by choosing the first stack recursively."""
    blocks = tuple(blocks)
    if not blocks:
        return {()}
    out = set()
    for r in range(1, len(blocks) + 1):
        for first in itertools.permutations(blocks, r):
            rest = tuple(b for b in blocks if b not in first)
            for tail in ordered_stack_lists(rest):
                out.add((first,) + tail)
    return out


_REL = re.compile(r"\s*(==|!=|=)\s*")


def check_identities(text, arr):
    """Re-evaluate every relation chain in an explicit trace; returns the number checked."""
    dp = [mwis_exhaustive(arr[i:])[1] if len(arr) - i >= 1 else 0 for i in range(len(arr))]

    def value(expr):
        expr = re.sub(r"input\[(\d+)\]", lambda m: f"({arr[int(m.group(1))]})", expr)
        expr = re.sub(r"dp\[(\d+)\]", lambda m: f"({dp[int(m.group(1))]})", expr)
        assert re.fullmatch(r"[\d\s()+\-,max]*", expr), expr
        return eval(expr, {"__builtins__": {}}, {"max": max})

    checked = 0
    for line in text.splitlines():
        if line.startswith("dp["):
            pieces = [line]
        elif line.startswith("Since "):
            clause = re.split(r" (?:and|or) can_use_next_item|, we store", line[len("Since "):])[0]
            pieces = [p for p in clause.split(", ") if p.strip()]
        else:
            continue
        for piece in pieces:
            if "can_use_next_item" in piece:
                continue
            parts = _REL.split(piece)
            exprs, rels = parts[0::2], parts[1::2]
            vals = [value(e) for e in exprs]
            for a, rel, b in zip(vals, rels, vals[1:]):
                assert (a != b) if rel == "!=" else (a == b), (line, piece)
                checked += 1
    return checked
