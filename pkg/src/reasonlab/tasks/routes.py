"""Flight-route planning: BFS oracle, the linearized-BFS trace, parsing and graph files.

Graph file schema (JSON)::

    {"cities": ["Dublin", "London", ...],
     "edges": [["Dublin", "London"], ...],
     "directed": false,
     "population": {"Dublin": 1200000}}   # optional, carried through untouched

Neighbour lists are kept in lexicographic order; that order drives every
expansion below, so routes and traces are reproducible.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from reasonlab.core import Environment, InapplicableAction, Step, TaskKind, UnknownState


class UnknownCity(KeyError):
    pass


class UnknownCityInEdge(ValueError):
    pass


class SchemaError(ValueError):
    pass


class NoRoute(RuntimeError):
    pass


class MalformedRoute(ValueError):
    pass


@dataclass(frozen=True)
class FlightGraph:
    cities: frozenset[str]
    adjacency: Mapping[str, tuple[str, ...]]
    directed: bool = False
    population: Mapping[str, int] = field(default_factory=dict, compare=False)

    @classmethod
    def from_edges(cls, cities: Sequence[str], edges: Sequence[Sequence[str]], directed: bool = False,
                   population: Mapping[str, int] | None = None) -> "FlightGraph":
        names = frozenset(cities)
        adj: dict[str, set[str]] = {c: set() for c in names}
        for edge in edges:
            if len(edge) != 2:
                raise SchemaError(f"edge must have two endpoints: {edge!r}")
            a, b = edge
            for c in (a, b):
                if c not in names:
                    raise UnknownCityInEdge(c)
            if a == b:
                raise SchemaError(f"self-loop on {a}")
            adj[a].add(b)
            if not directed:
                adj[b].add(a)
        return cls(names, {c: tuple(sorted(adj[c])) for c in sorted(names)}, directed, dict(population or {}))

    def neighbors(self, city: str) -> tuple[str, ...]:
        if city not in self.cities:
            raise UnknownCity(city)
        return self.adjacency[city]

    def degree(self, city: str) -> int:
        return len(self.neighbors(city))

    def edges(self) -> list[tuple[str, str]]:
        out = []
        for a in sorted(self.cities):
            for b in self.adjacency[a]:
                if self.directed or a < b:
                    out.append((a, b))
        return out

    def to_json(self) -> dict:
        data = {"cities": sorted(self.cities), "edges": [list(e) for e in self.edges()], "directed": self.directed}
        if self.population:
            data["population"] = dict(sorted(self.population.items()))
        return data


def graph_from_json(data: Mapping) -> FlightGraph:
    if not isinstance(data, Mapping):
        raise SchemaError("graph file must hold a JSON object")
    for key, kind in (("cities", list), ("edges", list)):
        if not isinstance(data.get(key), kind):
            raise SchemaError(f"missing or invalid {key!r}")
    directed = data.get("directed", False)
    if not isinstance(directed, bool):
        raise SchemaError("'directed' must be a boolean")
    if not all(isinstance(c, str) and c for c in data["cities"]):
        raise SchemaError("city names must be non-empty strings")
    if any("-" in c for c in data["cities"]):
        # the route format uses hyphens as the delimiter
        raise SchemaError("city names may not contain '-'")
    population = data.get("population") or {}
    return FlightGraph.from_edges(data["cities"], data["edges"], directed, population)


def ingest_graph(path: str | Path) -> FlightGraph:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return graph_from_json(data)


def _check(graph: FlightGraph, *cities: str) -> None:
    for c in cities:
        if c not in graph.cities:
            raise UnknownCity(c)


def bfs_route(graph: FlightGraph, start: str, goal: str) -> list[str] | None:
    """Fewest-hop route; the goal is recognised as soon as it is discovered."""
    _check(graph, start, goal)
    if start == goal:
        return [start]
    parent = {start: None}
    queue = deque([start])
    while queue:
        city = queue.popleft()
        for nxt in graph.neighbors(city):
            if nxt in parent:
                continue
            parent[nxt] = city
            if nxt == goal:
                route = [nxt]
                while parent[route[-1]] is not None:
                    route.append(parent[route[-1]])
                return route[::-1]
            queue.append(nxt)
    return None


def hop_distances(graph: FlightGraph, goal: str) -> dict[str, int]:
    """Hops from every city that can reach ``goal``."""
    _check(graph, goal)
    reverse: dict[str, list[str]] = {c: [] for c in graph.cities}
    for a in graph.cities:
        for b in graph.adjacency[a]:
            reverse[b].append(a)
    dist = {goal: 0}
    queue = deque([goal])
    while queue:
        c = queue.popleft()
        for p in reverse[c]:
            if p not in dist:
                dist[p] = dist[c] + 1
                queue.append(p)
    return dist


def is_valid_route(graph: FlightGraph, route: Sequence[str], start: str, goal: str) -> bool:
    if not route or route[0] != start or route[-1] != goal:
        return False
    try:
        return all(b in graph.neighbors(a) for a, b in zip(route, route[1:]))
    except UnknownCity:
        return False


def _path(p: Sequence[str]) -> str:
    return "-".join(p)


def _bracket(items: Sequence[str]) -> str:
    return "[" + ", ".join(items) + "]"


@dataclass(frozen=True)
class BfsTrace:
    lines: tuple[str, ...]
    queues: tuple[tuple[tuple[str, ...], ...], ...]
    explored: tuple[tuple[str, ...], ...]
    route: tuple[str, ...]

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def emit_tot_linear_trace(graph: FlightGraph, start: str, goal: str) -> BfsTrace:
    """Linearized BFS over full paths, in the one/two-shot trace format."""
    _check(graph, start, goal)
    lines = [f"The queue is [{start}]. Take the first path, {start}, from the queue."]
    queue: deque[tuple[str, ...]] = deque([(start,)])
    queues = [tuple(queue)]
    explored: list[str] = []
    snapshots = []
    if start == goal:
        lines.append(f"Answer: {start}")
        return BfsTrace(tuple(lines), tuple(queues), (), (start,))
    first = True
    while queue:
        path = queue.popleft()
        if not first:
            lines.append(f"Take the first path, {_path(path)}, from the queue.")
        first = False
        city = path[-1]
        if city in explored:
            lines.append(f"The current city is {city}, which is in the explored list. Thus, skip it.")
            continue
        explored.append(city)
        snapshots.append(tuple(explored))
        lines.append(f"The current city is {city}, which is not in the explored list. Thus, put the current "
                     f"city into the explored list. The explored list is {_bracket(explored)}")
        in_queue = {p[-1] for p in queue}
        proposals = [c for c in graph.neighbors(city) if c not in explored and c not in in_queue]
        lines.append(f"The current city is {city} and the goal is {goal}. For the next step, the promising "
                     f"cities to go to are {_bracket(proposals)}.")
        if goal in proposals:
            route = path + (goal,)
            lines.append(f"The goal city is {goal}. Since {goal} is in the found, and the current selected path "
                         f"is {_path(path)}, the route is {_path(route)}.")
            lines.append(f"Answer: {_path(route)}")
            return BfsTrace(tuple(lines), tuple(queues), tuple(snapshots), route)
        queue.extend(path + (c,) for c in proposals)
        queues.append(tuple(queue))
        lines.append(f"Puting those cities into the queue. The queue is {_bracket([_path(p) for p in queue])}.")
    raise NoRoute(f"{start} -> {goal}")


_TAKE = re.compile(r"^(?:The queue is \[(?P<init>.*)\]\. )?Take the first path, (?P<path>.*), from the queue\.$")
_EXPLORED = re.compile(r"^The current city is (?P<city>.*), which is not in the explored list\. .* "
                       r"The explored list is \[(?P<list>.*)\]$")
_SKIP = re.compile(r"^The current city is (?P<city>.*), which is in the explored list\. Thus, skip it\.$")
_PROPOSE = re.compile(r"^The current city is (?P<city>.*) and the goal is (?P<goal>.*)\. For the next step, "
                      r"the promising cities to go to are \[(?P<list>.*)\]\.$")
_PUT = re.compile(r"^Puting those cities into the queue\. The queue is \[(?P<list>.*)\]\.$")
_FOUND = re.compile(r"^The goal city is (?P<goal>.*)\. Since .* the route is (?P<route>.*)\.$")


def _items(text: str) -> list[str]:
    return [t for t in text.split(", ")] if text else []


def replay_trace(graph: FlightGraph, start: str, goal: str, text: str) -> list[str]:
    """Re-run a trace as a (queue, explored) machine and check every rule; returns the route.

    Raises :class:`ValueError` naming the first line that breaks FIFO order, the
    explored-list rules, the proposal filter or adjacency.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    queue: deque[tuple[str, ...]] = deque([(start,)])
    explored: list[str] = []
    path: tuple[str, ...] | None = None
    for n, line in enumerate(lines):
        def fail(why):
            raise ValueError(f"line {n + 1}: {why}: {line!r}")
        if m := _TAKE.match(line):
            if m.group("init") is not None and [m.group("init")] != [_path(p) for p in queue]:
                fail("initial queue mismatch")
            if not queue or _path(queue[0]) != m.group("path"):
                fail("not the head of the queue")
            path = queue.popleft()
        elif m := _SKIP.match(line):
            if path is None or m.group("city") != path[-1] or m.group("city") not in explored:
                fail("bad skip")
        elif m := _EXPLORED.match(line):
            city = m.group("city")
            if path is None or city != path[-1] or city in explored:
                fail("bad explored update")
            explored.append(city)
            if _items(m.group("list")) != explored:
                fail("explored list mismatch")
        elif m := _PROPOSE.match(line):
            city = m.group("city")
            props = _items(m.group("list"))
            expected = [c for c in graph.neighbors(city) if c not in explored and c not in {p[-1] for p in queue}]
            if path is None or city != path[-1] or props != expected:
                fail("proposal set is not the unexplored, unqueued neighbours")
            pending = props
        elif m := _PUT.match(line):
            queue.extend(path + (c,) for c in pending)
            if _items(m.group("list")) != [_path(p) for p in queue]:
                fail("queue mismatch")
        elif m := _FOUND.match(line):
            if m.group("goal") != goal or goal not in pending:
                fail("goal not among proposals")
            route = parse_route(m.group("route"))
            if route != list(path) + [goal]:
                fail("route does not extend the current path")
        elif line.startswith("Answer:"):
            route = parse_route(line[len("Answer:"):])
            if not is_valid_route(graph, route or [], start, goal):
                fail("answer is not a valid route")
            return route
        else:
            fail("unrecognised line")
    raise ValueError("trace has no answer line")


def parse_route(text: str) -> list[str] | None:
    text = text.strip()
    if text.startswith("Answer:"):
        text = text[len("Answer:"):].strip()
    text = text.rstrip(".").strip()
    if text == "None":
        return None
    if not text:
        raise MalformedRoute("empty route")
    cities = [c.strip() for c in text.split("-")]
    if any(not c for c in cities):
        raise MalformedRoute(f"empty city name in {text!r}")
    return cities


@dataclass(frozen=True)
class RouteState:
    path: tuple[str, ...]

    @property
    def city(self) -> str:
        return self.path[-1]


class RouteEnv(Environment):
    """State is the path flown so far; an action names the next city."""

    task_kind = TaskKind.ROUTES

    def __init__(self, graph: FlightGraph, start: str, goal: str):
        _check(graph, start, goal)
        self.graph = graph
        self.start = start
        self.goal_city = goal
        self._dist = None

    @property
    def initial_state(self):
        return RouteState((self.start,))

    def check_state(self, state):
        if not isinstance(state, RouteState) or not is_valid_route(self.graph, state.path, self.start, state.path[-1]):
            raise UnknownState(repr(state))

    def actions(self, state):
        return [c for c in self.graph.neighbors(state.city) if c not in state.path]

    def transition(self, state, action):
        if action not in self.graph.neighbors(state.city):
            raise InapplicableAction(action, f"no direct flight {state.city}-{action}")
        if action in state.path:
            raise InapplicableAction(action, f"{action} already visited")
        return RouteState(state.path + (action,))

    def goal(self, state):
        return state.city == self.goal_city

    def canonical(self, state):
        return _path(state.path)

    def goal_distance(self, state):
        if self._dist is None:
            self._dist = hop_distances(self.graph, self.goal_city)
        return self._dist.get(state.city)

    def problem_key(self):
        return (self.start, self.goal_city)

    def policy_key(self, state):
        # the N^2 next-city table: (current, goal) -> next
        return (state.city, self.goal_city)

    def transition_key(self, state, action):
        return ("fly",)

    def transition_value(self, state, action):
        return ("fly",)

    def realize(self, state, action, value):
        # the learned step just appends the proposed city; a bad proposal surfaces in validation
        return RouteState(state.path + (action,))

    def answer(self, initial_state, steps: Sequence[Step]):
        return _path(steps[-1].next_state.path if steps else initial_state.path)

    def verify_answer(self, answer):
        try:
            route = parse_route(answer)
        except MalformedRoute:
            return False
        return route is not None and is_valid_route(self.graph, route, self.start, self.goal_city)
