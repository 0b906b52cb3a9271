"""Position-indexed first-order transition models, thresholded chain graphs,
DOT rendering and per-position event histograms."""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

from trajmine.model import EventAlphabet, Sequence


def _events(s):
    return s.events if isinstance(s, Sequence) else tuple(s)


@dataclass(frozen=True, order=True)
class PositionedState:
    """An event code at a 1-based ordinal position, e.g. BLD@1."""

    position: int
    code: str

    def __post_init__(self):
        if self.position < 1:
            raise ValueError(f"position must be >= 1, got {self.position}")

    def __str__(self):
        return f"{self.code}@{self.position}"

    @classmethod
    def parse(cls, text: str) -> "PositionedState":
        code, pos = text.rsplit("@", 1)
        return cls(int(pos), code)


@dataclass(frozen=True)
class Transition:
    source: PositionedState
    target: PositionedState
    count: int
    probability: float


@dataclass(frozen=True)
class TransitionModel:
    occurrences: dict  # PositionedState -> count of sequences holding it
    ends: dict  # PositionedState -> count of sequences ending there
    counts: dict  # (source, target) -> count

    @property
    def states(self) -> list[PositionedState]:
        return sorted(self.occurrences)

    def probability(self, source, target) -> float:
        c = self.counts.get((source, target), 0)
        return c / self.occurrences[source] if c else 0.0

    def end_mass(self, state) -> float:
        return self.ends.get(state, 0) / self.occurrences[state]

    def transitions(self) -> list[Transition]:
        return [
            Transition(s, t, c, c / self.occurrences[s])
            for (s, t), c in sorted(self.counts.items())
        ]

    def outgoing(self, state) -> list[Transition]:
        return [tr for tr in self.transitions() if tr.source == state]

    def __add__(self, other: "TransitionModel") -> "TransitionModel":
        return TransitionModel(
            dict(Counter(self.occurrences) + Counter(other.occurrences)),
            dict(Counter(self.ends) + Counter(other.ends)),
            dict(Counter(self.counts) + Counter(other.counts)),
        )

    def to_json(self) -> dict:
        return {
            "states": [
                {"state": str(s), "code": s.code, "position": s.position, "occurrences": self.occurrences[s],
                 "end_count": self.ends.get(s, 0), "end_mass": self.end_mass(s)}
                for s in self.states
            ],
            "transitions": [
                {"source": str(t.source), "target": str(t.target), "count": t.count, "probability": t.probability}
                for t in self.transitions()
            ],
        }

    @classmethod
    def from_json(cls, data) -> "TransitionModel":
        occ, ends, counts = {}, {}, {}
        for row in data["states"]:
            s = PositionedState.parse(row["state"])
            occ[s] = row["occurrences"]
            if row["end_count"]:
                ends[s] = row["end_count"]
        for row in data["transitions"]:
            counts[(PositionedState.parse(row["source"]), PositionedState.parse(row["target"]))] = row["count"]
        return cls(occ, ends, counts)


def fit_transitions(sequences) -> TransitionModel:
    """Count state occurrences, adjacent transitions and sequence ends.

    Probabilities are count / occurrences(source); what is left over is the
    end mass, so each state's outgoing row plus end mass sums to one.
    """
    occ, ends, counts = Counter(), Counter(), Counter()
    n = 0
    for s in sequences:
        ev = _events(s)
        n += 1
        states = [PositionedState(p, c) for p, c in enumerate(ev, start=1)]
        occ.update(states)
        counts.update(zip(states, states[1:]))
        if states:
            ends[states[-1]] += 1
    if n == 0:
        raise ValueError("cannot fit a transition model on an empty group")
    return TransitionModel(dict(occ), dict(ends), dict(counts))


@dataclass(frozen=True)
class ChainGraph:
    nodes: dict  # PositionedState -> occurrence count
    edges: tuple  # Transition, sorted

    def __len__(self):
        return len(self.edges)

    def paths(self, limit: int = 10_000) -> list[list[PositionedState]]:
        """Maximal chains obtained by following target-equals-source links."""
        succ: dict = {}
        has_pred = set()
        for e in self.edges:
            succ.setdefault(e.source, []).append(e.target)
            has_pred.add(e.target)
        out = []
        stack = [[s] for s in sorted(succ, reverse=True) if s not in has_pred]
        while stack and len(out) < limit:
            path = stack.pop()
            nxt = succ.get(path[-1])
            if not nxt:
                out.append(path)
            else:
                stack.extend(path + [t] for t in sorted(nxt, reverse=True))
        return out

    def to_json(self) -> dict:
        return {
            "nodes": [{"state": str(s), "code": s.code, "position": s.position, "frequency": f}
                      for s, f in sorted(self.nodes.items())],
            "edges": [{"source": str(e.source), "target": str(e.target), "count": e.count,
                       "probability": e.probability} for e in self.edges],
            "chains": [[str(s) for s in p] for p in self.paths()],
        }

    @classmethod
    def from_json(cls, data) -> "ChainGraph":
        nodes = {PositionedState.parse(r["state"]): r["frequency"] for r in data["nodes"]}
        edges = tuple(
            Transition(PositionedState.parse(r["source"]), PositionedState.parse(r["target"]), r["count"],
                       r["probability"])
            for r in data["edges"]
        )
        return cls(nodes, edges)


def extract_chains(model: TransitionModel, prob_threshold: float = 0.1, freq_threshold: int = 30) -> ChainGraph:
    """Keep transitions at or above both thresholds and the states they touch."""
    if prob_threshold <= 0 or freq_threshold <= 0:
        raise ValueError("thresholds must be positive")
    kept = tuple(t for t in model.transitions() if t.probability >= prob_threshold and t.count >= freq_threshold)
    nodes = {}
    for t in kept:
        nodes[t.source] = model.occurrences[t.source]
        nodes[t.target] = model.occurrences[t.target]
    if not kept:
        warnings.warn(
            f"no transition passes prob >= {prob_threshold} and count >= {freq_threshold}", stacklevel=2
        )
    return ChainGraph(nodes, kept)


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: ChainGraph, alphabet: EventAlphabet, name: str = "chains",
           max_node_width: float = 1.5, max_penwidth: float = 8.0) -> str:
    """Render a chain graph as Graphviz DOT.

    Node area scales with state frequency, pen width with transition count.
    """
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;",
             '  node [shape=circle, style=filled, fixedsize=true, fontsize=10];']
    if graph.nodes:
        fmax = max(graph.nodes.values())
        for s in sorted(graph.nodes):
            width = max_node_width * math.sqrt(graph.nodes[s] / fmax)
            color = alphabet[s.code].color if s.code in alphabet else "#7F7F7F"
            lines.append(f"  {_q(str(s))} [label={_q(str(s))}, fillcolor={_q(color)}, "
                         f"width={width:.4f}, tooltip={_q(f'n={graph.nodes[s]}')}];")
    if graph.edges:
        cmax = max(e.count for e in graph.edges)
        for e in graph.edges:
            lines.append(f"  {_q(str(e.source))} -> {_q(str(e.target))} "
                         f"[label={_q(f'{e.probability:.2f}')}, penwidth={max_penwidth * e.count / cmax:.4f}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PositionHistogram:
    codes: tuple
    counts: np.ndarray  # (max_len, n_codes)
    totals: np.ndarray  # sequences reaching each position

    @property
    def proportions(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.totals[:, None] > 0, self.counts / self.totals[:, None], 0.0)

    def cell(self, position: int, code: str) -> float:
        return float(self.proportions[position - 1, self.codes.index(code)])

    def to_csv_rows(self):
        props = self.proportions
        yield ["position", "n_sequences", *self.codes]
        for p in range(len(self.totals)):
            yield [p + 1, int(self.totals[p]), *(f"{v:.6f}" for v in props[p])]


def position_histogram(sequences, alphabet: EventAlphabet) -> PositionHistogram:
    """Share of each code among the sequences that reach each position."""
    seqs = [_events(s) for s in sequences]
    if not seqs:
        raise ValueError("empty group")
    codes = alphabet.codes
    width = max(len(s) for s in seqs)
    counts = np.zeros((width, len(codes)), dtype=np.int64)
    for s in seqs:
        for p, c in enumerate(s):
            counts[p, alphabet.index(c)] += 1
    return PositionHistogram(codes, counts, counts.sum(axis=1))


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
