"""Seeded synthetic trajectories from planted per-group Markov chains."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from trajmine.model import EventAlphabet, Sequence, SequenceBank

END = "END"
_TOL = 1e-9


@dataclass(frozen=True)
class GroupSpec:
    """One planted group.

    `transitions[p]` maps a code to its next-code distribution when that
    code sits at position p+1; the last table is reused for all later
    positions. `termination[p]` holds the matching stop probabilities, so
    each row plus its stop probability sums to one.
    """

    name: str
    weight: float
    initial: dict
    transitions: list
    termination: list = field(default_factory=list)

    def row(self, position: int, code: str):
        k = min(position, len(self.transitions)) - 1
        table = self.transitions[k]
        if code not in table:
            raise ValueError(f"group {self.name}: no transition row for {code} at position {position}")
        term = self.termination[min(position, len(self.termination)) - 1].get(code, 0.0) if self.termination else 0.0
        return table[code], term


@dataclass(frozen=True)
class GeneratorSpec:
    groups: list
    n_patients: int
    seed: int
    max_length: int = 36
    time_first_mean: float = 2.0
    time_gap_mean: float = 3.0

    def validate(self, alphabet: EventAlphabet) -> None:
        if self.n_patients < 1:
            raise ValueError("n_patients must be >= 1")
        if not self.groups:
            raise ValueError("spec has no groups")
        wsum = sum(g.weight for g in self.groups)
        if abs(wsum - 1.0) > _TOL:
            raise ValueError(f"group weights sum to {wsum!r}, not 1")
        for g in self.groups:
            if g.weight < 0:
                raise ValueError(f"group {g.name}: negative weight")
            _check_dist(g.initial, alphabet, f"group {g.name} initial")
            if not g.transitions:
                raise ValueError(f"group {g.name}: needs at least one transition table")
            if g.termination and len(g.termination) != len(g.transitions):
                raise ValueError(f"group {g.name}: termination and transition tables differ in count")
            for p, table in enumerate(g.transitions, start=1):
                for code, row in table.items():
                    if code not in alphabet:
                        raise ValueError(f"group {g.name}: unknown code {code}")
                    term = g.termination[p - 1].get(code, 0.0) if g.termination else 0.0
                    _check_dist(row, alphabet, f"group {g.name} position {p} row {code}", extra=term)
            reachable = set(g.initial)
            for table in g.transitions:
                for row in table.values():
                    reachable.update(row)
            for table_no, table in enumerate(g.transitions, start=1):
                missing = sorted(c for c in reachable if not alphabet.is_terminal(c) and c not in table)
                if missing:
                    raise ValueError(f"group {g.name}: table {table_no} lacks rows for {missing}")

    def to_json(self) -> dict:
        return {
            "n_patients": self.n_patients,
            "seed": self.seed,
            "max_length": self.max_length,
            "time_first_mean": self.time_first_mean,
            "time_gap_mean": self.time_gap_mean,
            "groups": [g.__dict__ for g in self.groups],
        }

    @classmethod
    def from_json(cls, data) -> "GeneratorSpec":
        groups = [GroupSpec(g["name"], g["weight"], g["initial"], g["transitions"], g.get("termination", []))
                  for g in data["groups"]]
        return cls(groups, int(data["n_patients"]), int(data["seed"]), int(data.get("max_length", 36)),
                   float(data.get("time_first_mean", 2.0)), float(data.get("time_gap_mean", 3.0)))

    @classmethod
    def load(cls, path) -> "GeneratorSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _check_dist(dist, alphabet, where, extra=0.0):
    for code, p in dist.items():
        if code not in alphabet:
            raise ValueError(f"{where}: unknown code {code}")
        if p < 0:
            raise ValueError(f"{where}: negative probability for {code}")
    total = sum(dist.values()) + extra
    if abs(total - 1.0) > _TOL:
        raise ValueError(f"{where}: probabilities sum to {total!r}, not 1")


def _draw(rng, dist: dict, extra_end: float = 0.0):
    keys = sorted(dist)
    probs = [dist[k] for k in keys]
    if extra_end:
        keys.append(END)
        probs.append(extra_end)
    probs = np.asarray(probs, dtype=np.float64)
    return keys[int(rng.choice(len(keys), p=probs / probs.sum()))]


def simulate(spec: GeneratorSpec, alphabet: EventAlphabet | None = None):
    """Sample a bank and the true group name of every patient.

    Each patient draws a group by weight, then walks that group's chain
    until it stops, hits a terminal code or reaches max_length.
    """
    alphabet = alphabet or EventAlphabet.default()
    spec.validate(alphabet)
    rng = np.random.default_rng(spec.seed)
    weights = np.array([g.weight for g in spec.groups], dtype=np.float64)
    width = len(str(spec.n_patients))
    seqs, labels = [], {}
    for i in range(spec.n_patients):
        g = spec.groups[int(rng.choice(len(spec.groups), p=weights / weights.sum()))]
        code = _draw(rng, g.initial)
        events = [code]
        while len(events) < spec.max_length and not alphabet.is_terminal(code):
            row, term = g.row(len(events), code)
            code = _draw(rng, row, term)
            if code == END:
                break
            events.append(code)
        t = round(float(rng.exponential(spec.time_first_mean)), 2)
        times = [t]
        for _ in events[1:]:
            t = round(t + 0.01 + float(rng.exponential(spec.time_gap_mean)), 2)
            times.append(t)
        pid = f"{i + 1:0{width}d}"
        seqs.append(Sequence(pid, tuple(events), tuple(times)))
        labels[pid] = g.name
    return SequenceBank(alphabet, tuple(seqs)), labels


def write_labels_csv(labels: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "group"])
        for pid in sorted(labels):
            w.writerow([pid, labels[pid]])


def read_labels_csv(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["patient_id"]: row["group"] for row in csv.DictReader(fh)}


def _spread(codes, mass):
    return {c: mass / len(codes) for c in codes}


def _add(*dists):
    out = {}
    for d in dists:
        for k, v in d.items():
            out[k] = out.get(k, 0.0) + v
    return out


def planted_three_group_spec(n_patients: int = 900, seed: int = 0, noise: float = 0.1,
                             alphabet: EventAlphabet | None = None) -> GeneratorSpec:
    """Recurrent bleeding, recurrent infection and malfunction-to-explant
    groups in equal shares, each spending `noise` of every row on the other
    non-terminal codes."""
    alphabet = alphabet or EventAlphabet.default()
    nonterm = [c for c in alphabet.codes if not alphabet.is_terminal(c)]
    sig = 1.0 - noise

    def recurrent(name, code):
        others = [c for c in nonterm if c != code]
        noise_d = _spread(others, noise)
        first = {c: _add({code: sig}, noise_d) for c in nonterm}
        later = {c: _add({code: 0.6 * sig / 0.9, "DTH": 0.05, "TXP": 0.05}, noise_d) for c in nonterm}
        stop_later = {c: 1.0 - sum(later[c].values()) for c in nonterm}
        return GroupSpec(name, 1 / 3, _add({code: sig}, noise_d), [first, later],
                         [{c: 0.0 for c in nonterm}, stop_later])

    def malfunction(name):
        others = [c for c in nonterm if c != "DMF"]
        noise_d = _spread(others, noise)
        table = {c: _add({"DMF": 0.7, "EXP": 0.1}, noise_d) for c in others}
        table["DMF"] = _add({"EXP": 0.6, "DMF": 0.2}, noise_d)
        stop = {c: 1.0 - sum(row.values()) for c, row in table.items()}
        return GroupSpec(name, 1 / 3, _add({"DMF": sig}, noise_d), [table], [stop])

    return GeneratorSpec(
        [recurrent("recurrent_bleeding", "BLD"), recurrent("recurrent_infection", "INF"), malfunction("malfunction_explant")],
        n_patients, seed,
    )
