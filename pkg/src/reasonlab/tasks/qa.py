"""Multi-hop question answering over parsed relation triplets.

A composed query is a list of triplet templates.  Terms may contain slots
written ``?name``; a term such as ``"?b and ?c"`` or ``"Arrondissement of ?a"``
becomes a concrete entity once its slots are bound.  Solving repeatedly picks
the first template with exactly one unbound slot, looks it up in the graph and
binds the slot, so the number of steps equals the number of slots.

Entities and relations match after case-folding and an optional alias table.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

SLOT = re.compile(r"\?\w+")


class Unanswerable(LookupError):
    pass


class AmbiguousMatch(LookupError):
    def __init__(self, template, candidates):
        super().__init__(f"{template} matches {len(candidates)} graph triplets: {sorted(candidates)}")
        self.template = template
        self.candidates = candidates


class MalformedTriplet(ValueError):
    pass


Triplet = tuple[str, str, str]


def parse_triplet(text: str) -> Triplet:
    """``(head, relation, tail)``; the tail keeps any further commas."""
    text = text.strip()
    while text.endswith("))"):
        text = text[:-1]
    if not (text.startswith("(") and text.endswith(")")):
        raise MalformedTriplet(text)
    parts = text[1:-1].split(", ", 2)
    if len(parts) != 3 or not all(p.strip() for p in parts):
        raise MalformedTriplet(text)
    return tuple(p.strip() for p in parts)


def render_triplet(t: Triplet) -> str:
    return f"({t[0]}, {t[1]}, {t[2]})"


@dataclass(frozen=True)
class KnowledgeGraph:
    triplets: tuple[Triplet, ...]
    entity_aliases: Mapping[str, str] = field(default_factory=dict)
    relation_aliases: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        ea = {k.casefold(): v.casefold() for k, v in self.entity_aliases.items()}
        ra = {k.casefold(): v.casefold() for k, v in self.relation_aliases.items()}
        object.__setattr__(self, "entity_aliases", ea)
        object.__setattr__(self, "relation_aliases", ra)
        seen, unique = set(), []
        for t in self.triplets:
            t = tuple(t)
            key = self.canonical(t)
            if key not in seen:
                seen.add(key)
                unique.append(t)
        object.__setattr__(self, "triplets", tuple(unique))

    @classmethod
    def from_lines(cls, lines: Sequence[str], **aliases) -> "KnowledgeGraph":
        return cls(tuple(parse_triplet(ln) for ln in lines if ln.strip()), **aliases)

    def entity(self, name: str) -> str:
        c = name.strip().casefold()
        return self.entity_aliases.get(c, c)

    def relation(self, name: str) -> str:
        c = name.strip().casefold()
        return self.relation_aliases.get(c, c)

    def canonical(self, t: Triplet) -> Triplet:
        return (self.entity(t[0]), self.relation(t[1]), self.entity(t[2]))


@dataclass(frozen=True)
class ComposedQuery:
    templates: tuple[Triplet, ...]
    answer_slot: str

    def __post_init__(self):
        object.__setattr__(self, "templates", tuple(tuple(t) for t in self.templates))
        slots = self.slots
        if self.answer_slot not in slots:
            raise ValueError(f"answer slot {self.answer_slot} does not occur in the query")
        # acyclic + connected: solving symbolically must bind every slot
        bound: set[str] = set()
        progress = True
        while progress:
            progress = False
            for t in self.templates:
                free = _free(t, bound)
                if len(free) == 1:
                    bound |= free
                    progress = True
        if bound != slots:
            raise ValueError(f"slots {sorted(slots - bound)} can never be resolved one at a time")

    @property
    def slots(self) -> set[str]:
        return {s for t in self.templates for term in t for s in SLOT.findall(term)}


def _free(t: Triplet, bound) -> set[str]:
    return {s for term in t for s in SLOT.findall(term) if s not in bound}


def _fill(term: str, bindings: Mapping[str, str]) -> str:
    return SLOT.sub(lambda m: bindings.get(m.group(0), m.group(0)), term)


def _match_term(graph: KnowledgeGraph, term: str, value: str, bindings, is_relation=False) -> dict | None:
    """Bindings extension if ``value`` instantiates ``term``; None otherwise."""
    filled = _fill(term, bindings)
    free = SLOT.findall(filled)
    canon = graph.relation if is_relation else graph.entity
    if not free:
        return {} if canon(filled) == canon(value) else None
    pieces = SLOT.split(filled)
    pattern = "(.+?)".join(re.escape(p) for p in pieces)
    m = re.fullmatch(pattern, value.strip(), re.IGNORECASE)
    if m is None:
        return None
    new = {}
    for slot, got in zip(free, m.groups()):
        if new.get(slot, got) != got:
            return None
        new[slot] = got
    return new


@dataclass(frozen=True)
class QaStep:
    template: Triplet
    matched: Triplet
    slot: str
    entity: str

    def render(self) -> str:
        return f"{render_triplet(self.matched)} => {self.slot} = {self.entity}"


def qa_solve(graph: KnowledgeGraph, query: ComposedQuery) -> tuple[str, list[QaStep]]:
    bindings: dict[str, str] = {}
    steps: list[QaStep] = []
    while query.answer_slot not in bindings or len(bindings) < len(query.slots):
        ready = [t for t in query.templates if len(_free(t, bindings)) == 1]
        if not ready:
            raise Unanswerable("no sub-question has exactly one unknown")
        template = ready[0]
        (slot,) = _free(template, bindings)
        found: dict[str, Triplet] = {}
        for triplet in graph.triplets:
            ext: dict | None = {}
            for term, value, is_rel in zip(template, triplet, (False, True, False)):
                part = _match_term(graph, term, value, {**bindings, **ext}, is_rel)
                if part is None:
                    ext = None
                    break
                ext.update(part)
            if ext is not None and slot in ext:
                found.setdefault(graph.entity(ext[slot]), (ext[slot], triplet))
        if not found:
            raise Unanswerable(f"no triplet matches {render_triplet(template)}")
        if len(found) > 1:
            raise AmbiguousMatch(render_triplet(template), [v[0] for v in found.values()])
        entity, triplet = next(iter(found.values()))
        bindings[slot] = entity
        steps.append(QaStep(template, triplet, slot, entity))
    return bindings[query.answer_slot], steps


def qa_trace(graph: KnowledgeGraph, query: ComposedQuery) -> str:
    answer, steps = qa_solve(graph, query)
    lines = [s.render() for s in steps] + [f"The answer is {answer}."]
    return "\n".join(lines) + "\n"


_PUNCT = str.maketrans("", "", string.punctuation)


def _tokens(text: str) -> list[str]:
    return text.lower().translate(_PUNCT).split()


def qa_f1(predicted: str, gold: str) -> float:
    p, g = _tokens(predicted), _tokens(gold)
    if not p and not g:
        return 1.0
    common = sum((Counter(p) & Counter(g)).values())
    if common == 0:
        return 0.0
    precision, recall = common / len(p), common / len(g)
    return 2 * precision * recall / (precision + recall)
