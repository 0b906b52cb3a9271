"""End-to-end run: ingest, distances, step-wise clustering, per-group
pattern mining and Markov chains, written to one output directory."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from trajmine import clustering, distance, markov, subseq
from trajmine.config import PipelineConfig
from trajmine.model import EventAlphabet, SequenceBank, bank_to_json, ingest

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
STAGES = ("ingest", "distances", "cluster", "mine", "markov", "render", "stats")
ARTIFACTS = ("bank.json", "distances.bin", "distance_stats.json", "dendrogram.json", "group_tree.json",
             "membership.csv", "discrimination_*.csv", "discrimination_*.json", "support_*.csv", "support_*.json",
             "transitions_*.json", "chains_*.json", "chains_*.dot", "histogram_*.csv", "event_frequency.csv",
             "group_stats.csv", MANIFEST)


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_alphabet(cfg: PipelineConfig) -> EventAlphabet:
    return EventAlphabet.from_json(cfg.alphabet) if cfg.alphabet else EventAlphabet.default()


def load_bank(cfg: PipelineConfig) -> SequenceBank:
    if not cfg.input:
        raise ValueError("no input CSV given")
    return ingest(cfg.input, load_alphabet(cfg))


def read_membership(path, bank: SequenceBank) -> dict[str, list[int]]:
    """Group name -> bank indices; names in natural order (GRP2 before GRP10)."""
    pos = {pid: i for i, pid in enumerate(bank.patient_ids)}
    groups: dict[str, list[int]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["patient_id"] not in pos:
                raise ValueError(f"{path}: patient {row['patient_id']!r} not in input")
            groups.setdefault(row["group_id"], []).append(pos[row["patient_id"]])
    return {k: groups[k] for k in sorted(groups, key=lambda g: (len(g), g))}


def write_membership(groups: dict[str, list[int]], bank: SequenceBank, path) -> None:
    rows = sorted((i, name) for name, members in groups.items() for i in members)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "group_id"])
        w.writerows((bank[i].patient_id, name) for i, name in rows)


def groups_for(out: Path, bank: SequenceBank) -> dict[str, list[int]]:
    path = out / "membership.csv"
    if path.exists():
        return read_membership(path, bank)
    return {"ALL": list(range(len(bank)))}


# -- stages -----------------------------------------------------------------

def stage_ingest(cfg, out: Path, bank=None):
    bank = bank or load_bank(cfg)
    _dump(bank_to_json(bank), out / "bank.json")
    return bank


def stage_distances(cfg, out: Path, bank):
    matrix = distance.distance_matrix(bank, workers=cfg.workers)
    matrix.save(out / "distances.bin")
    distance.write_stats_json(distance.distance_stats(matrix), out / "distance_stats.json")
    return matrix


def cached_matrix(cfg, out: Path, bank):
    path = out / "distances.bin"
    if path.exists():
        m = distance.CondensedDistanceMatrix.load(path)
        if m.n == len(bank):
            return m
        log.warning("ignoring %s: built for %d sequences, input has %d", path, m.n, len(bank))
    return distance.distance_matrix(bank, workers=cfg.workers)


def stage_cluster(cfg, out: Path, bank, matrix, groups: int | None = None):
    dendro = clustering.canonical_linkage(bank, matrix, method=cfg.linkage)
    _dump(dendro.to_json(), out / "dendrogram.json")
    if groups is not None:
        parts = clustering.cut(dendro, groups)
        write_membership({f"GRP{k}": p for k, p in enumerate(parts, start=1)}, bank, out / "membership.csv")
        return None
    tree = clustering.stepwise_cluster(bank, params=cfg.stepwise_params(), dendrogram=dendro)
    clustering.write_tree_json(tree, bank, out / "group_tree.json")
    tree.write_membership_csv(bank, out / "membership.csv")
    for node in tree.nodes.values():
        if node.split_passed is not None:
            subseq.write_discrimination_csv(node.discrimination, out / f"discrimination_node{node.node_id}.csv")
            subseq.write_json(node.discrimination, out / f"discrimination_node{node.node_id}.json")
    for leaf in tree.leaves():
        log.info(clustering.summarize_leaf(leaf))
    return tree


def stage_mine(cfg, out: Path, bank):
    for name, members in groups_for(out, bank).items():
        res = subseq.mine_frequent([bank[i] for i in members], cfg.min_support, cfg.max_len)
        subseq.write_support_csv(res, out / f"support_{name}.csv")
        subseq.write_json(res, out / f"support_{name}.json")


def stage_discriminate(cfg, out: Path, bank, g1: str, g2: str):
    groups = groups_for(out, bank)
    for g in (g1, g2):
        if g not in groups:
            raise ValueError(f"unknown group {g!r}; have {sorted(groups)}")
    s1 = [bank[i] for i in groups[g1]]
    s2 = [bank[i] for i in groups[g2]]
    res = subseq.discriminate(s1, s2, min_support=cfg.min_support, max_len=cfg.max_len, top_k=cfg.candidate_top_k)
    subseq.write_discrimination_csv(res, out / f"discrimination_{g1}_vs_{g2}.csv")
    subseq.write_json(res, out / f"discrimination_{g1}_vs_{g2}.json")
    return res


def stage_markov(cfg, out: Path, bank):
    graphs = {}
    for name, members in groups_for(out, bank).items():
        model = markov.fit_transitions([bank[i] for i in members])
        markov.write_json(model, out / f"transitions_{name}.json")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            graph = markov.extract_chains(model, cfg.prob_threshold, cfg.freq_threshold)
        if not graph.edges:
            log.warning("group %s: no transition passes the thresholds", name)
        markov.write_json(graph, out / f"chains_{name}.json")
        graphs[name] = graph
    return graphs


def stage_render(cfg, out: Path, alphabet: EventAlphabet):
    written = []
    for path in sorted(out.glob("chains_*.json")):
        name = path.stem[len("chains_"):]
        graph = markov.ChainGraph.from_json(_load(path))
        dot = out / f"chains_{name}.dot"
        dot.write_text(markov.to_dot(graph, alphabet, name=name), encoding="utf-8")
        written.append(dot)
    return written


def event_frequency(bank: SequenceBank) -> list[dict]:
    """Per-code event counts and share of all events, in alphabet order."""
    counts = Counter(c for s in bank for c in s.events)
    total = sum(counts.values())
    rows = [{"code": t.code, "event": t.label, "terminal": t.terminal, "frequency": counts[t.code],
             "percent": round(100.0 * counts[t.code] / total, 1)} for t in bank.alphabet]
    rows.append({"code": "TOTAL", "event": "Total recorded events", "terminal": "", "frequency": total,
                 "percent": 100.0})
    return rows


def stage_stats(cfg, out: Path, bank):
    rows = event_frequency(bank)
    with open(out / "event_frequency.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    groups = groups_for(out, bank)
    stat_rows = []
    for name, members in groups.items():
        row = {"group_id": name, **clustering.group_stats(members, bank).to_row()}
        stat_rows.append({k: (f"{v:.4f}" if isinstance(v, float) else ("" if v is None else v)) for k, v in row.items()})
        hist = markov.position_histogram([bank[i] for i in members], bank.alphabet)
        with open(out / f"histogram_{name}.csv", "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(hist.to_csv_rows())
    with open(out / "group_stats.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(stat_rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(stat_rows)


# -- manifest ---------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(cfg: PipelineConfig, out: Path, stages: list[dict]) -> dict:
    conf = cfg.to_json()
    conf.pop("out")
    conf.pop("workers")
    inputs = {}
    for key in ("input", "alphabet"):
        if conf.get(key):
            inputs[key] = {"name": Path(conf[key]).name, "sha256": _sha256(Path(conf[key]))}
            conf[key] = Path(conf[key]).name
    files = [
        {"path": p.relative_to(out).as_posix(), "bytes": p.stat().st_size, "sha256": _sha256(p)}
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.name != MANIFEST
    ]
    failed = [s["name"] for s in stages if s["status"] == "failed"]
    return {
        "config": conf,
        "inputs": inputs,
        "stages": stages,
        "status": "failed" if failed else "ok",
        "failed_stage": failed[0] if failed else None,
        "files": files,
    }


def verify_manifest(out) -> list[str]:
    """Files whose content no longer matches the manifest (empty when clean)."""
    out = Path(out)
    man = _load(out / MANIFEST)
    bad = []
    for f in man["files"]:
        p = out / f["path"]
        if not p.exists() or _sha256(p) != f["sha256"]:
            bad.append(f["path"])
    return bad


@dataclass
class PipelineResult:
    out: Path
    manifest: dict
    bank: SequenceBank | None = None
    matrix: distance.CondensedDistanceMatrix | None = None
    tree: clustering.GroupTree | None = None
    graphs: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.manifest["status"] == "ok"


def run_pipeline(cfg: PipelineConfig, bank: SequenceBank | None = None) -> PipelineResult:
    """Run every stage into cfg.out and write manifest.json.

    On a stage failure the files written so far are kept, the manifest marks
    the failed stage, and StageError is raised.
    """
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for pattern in ARTIFACTS:
        for stale in out.glob(pattern):
            stale.unlink()
    res = PipelineResult(out, {})
    stages: list[dict] = []

    def run(name, fn, *args):
        try:
            value = fn(*args)
        except Exception as exc:
            stages.append({"name": name, "status": "failed", "error": f"{type(exc).__name__}: {exc}"})
            res.manifest = build_manifest(cfg, out, stages)
            _dump(res.manifest, out / MANIFEST)
            raise StageError(name, exc) from exc
        stages.append({"name": name, "status": "ok"})
        return value

    res.bank = run("ingest", stage_ingest, cfg, out, bank)
    res.matrix = run("distances", stage_distances, cfg, out, res.bank)
    res.tree = run("cluster", stage_cluster, cfg, out, res.bank, res.matrix)
    run("mine", stage_mine, cfg, out, res.bank)
    res.graphs = run("markov", stage_markov, cfg, out, res.bank)
    run("render", stage_render, cfg, out, res.bank.alphabet)
    run("stats", stage_stats, cfg, out, res.bank)
    res.manifest = build_manifest(cfg, out, stages)
    _dump(res.manifest, out / MANIFEST)
    return res
