"""Ward agglomeration, dendrogram cutting and step-wise split-and-validate
grouping."""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field

import numpy as np

from trajmine import _kernels
from trajmine.distance import CondensedDistanceMatrix
from trajmine.model import SequenceBank
from trajmine.subseq import (
    DiscriminationResult,
    SupportResult,
    candidate_patterns,
    discriminate,
    format_pattern,
    mine_frequent,
)


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Binary merge tree. Leaves are nodes 0..n-1; merge t creates node n+t."""

    n_leaves: int
    merges: tuple[Merge, ...]

    def __post_init__(self):
        object.__setattr__(self, "merges", tuple(self.merges))
        if len(self.merges) != self.n_leaves - 1:
            raise ValueError(f"{self.n_leaves} leaves need {self.n_leaves - 1} merges, got {len(self.merges)}")

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    @property
    def root(self) -> int:
        return 2 * self.n_leaves - 2

    def node_size(self, node: int) -> int:
        return 1 if node < self.n_leaves else self.merges[node - self.n_leaves].size

    def children(self, node: int) -> tuple[int, int] | None:
        if node < self.n_leaves:
            return None
        m = self.merges[node - self.n_leaves]
        return m.left, m.right

    def leaves(self, node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < self.n_leaves:
                out.append(x)
            else:
                m = self.merges[x - self.n_leaves]
                stack.extend((m.right, m.left))
        return sorted(out)

    def relabel_leaves(self, mapping) -> "Dendrogram":
        """Rename leaf k to mapping[k]; internal node ids are unchanged."""
        n = self.n_leaves

        def f(x):
            return int(mapping[x]) if x < n else x

        return Dendrogram(n, tuple(Merge(f(m.left), f(m.right), m.height, m.size) for m in self.merges))

    def to_linkage(self) -> np.ndarray:
        """scipy-style (n-1, 4) linkage array."""
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=np.float64)

    def to_json(self) -> dict:
        return {
            "n_leaves": self.n_leaves,
            "merges": [[m.left, m.right, m.height, m.size] for m in self.merges],
        }

    @classmethod
    def from_json(cls, data) -> "Dendrogram":
        return cls(data["n_leaves"], tuple(Merge(int(a), int(b), float(h), int(s)) for a, b, h, s in data["merges"]))


def lance_williams_ward(d_ik, d_jk, d_ij, size_i, size_j, size_k):
    """Ward distance from the union of clusters i and j to cluster k."""
    t = size_i + size_j + size_k
    d = ((size_i + size_k) / t) * d_ik + ((size_j + size_k) / t) * d_jk - (size_k / t) * d_ij
    return max(d, min(d_ik, d_jk)) if d_ij <= min(d_ik, d_jk) else d


def _ward_greedy(matrix: CondensedDistanceMatrix) -> Dendrogram:
    # O(n^3) reference: global minimum each step, ties to the smallest
    # (left, right) node-id pair.
    n = matrix.n
    D = matrix.square()
    np.fill_diagonal(D, np.inf)
    size = np.ones(n)
    node = np.arange(n)
    active = np.ones(n, dtype=bool)
    merges = []
    for step in range(n - 1):
        sub = np.where(active[:, None] & active[None, :], D, np.inf)
        best = sub.min()
        ii, jj = np.nonzero(np.triu(sub == best, 1))
        pairs = sorted((min(node[i], node[j]), max(node[i], node[j]), i, j) for i, j in zip(ii, jj))
        left, right, x, y = pairs[0]
        sx, sy = size[x], size[y]
        t = sx + sy + size
        row = ((sx + size) / t) * D[x] + ((sy + size) / t) * D[y] - (size / t) * best
        row = np.maximum(row, np.minimum(D[x], D[y]))
        row[x] = row[y] = np.inf
        D[x, :] = row
        D[:, x] = row
        active[y] = False
        size[x] = sx + sy
        node[x] = n + step
        merges.append(Merge(int(left), int(right), float(best), int(sx + sy)))
    return Dendrogram(n, tuple(merges))


def _relabel(n, slot_a, slot_b, heights) -> Dendrogram:
    order = np.argsort(heights, kind="stable")
    parent = list(range(n))
    node_of = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    sizes = {i: 1 for i in range(n)}
    merges = []
    for step, k in enumerate(order):
        ra, rb = find(int(slot_a[k])), find(int(slot_b[k]))
        na, nb = node_of[ra], node_of[rb]
        size = sizes.pop(na) + sizes.pop(nb)
        parent[ra] = rb
        node_of[rb] = n + step
        sizes[n + step] = size
        merges.append(Merge(min(na, nb), max(na, nb), float(heights[k]), size))
    return Dendrogram(n, tuple(merges))


def ward_linkage(matrix: CondensedDistanceMatrix, method: str = "nn_chain") -> Dendrogram:
    """Ward agglomeration on raw dissimilarities via the Lance-Williams update.

    `method="greedy"` is the literal global-minimum algorithm with
    lexicographic tie-breaking; `"nn_chain"` is the O(n^2) nearest-neighbour
    chain, which gives the same tree whenever there are no distance ties.
    """
    if matrix.n < 2:
        raise ValueError("ward_linkage needs at least 2 observations")
    if method == "greedy":
        return _ward_greedy(matrix)
    if method != "nn_chain":
        raise ValueError(f"unknown method {method!r}")
    dist = matrix.values.astype(np.float64)
    a, b, h = _kernels.ward_nn_chain(dist, matrix.n)
    return _relabel(matrix.n, a, b, h)


def canonical_order(bank: SequenceBank) -> list[int]:
    """Bank indices sorted by (events, patient_id), independent of bank order."""
    return sorted(range(len(bank)), key=lambda i: (bank[i].events, bank[i].patient_id))


def canonical_linkage(bank: SequenceBank, matrix: CondensedDistanceMatrix, method: str = "nn_chain") -> Dendrogram:
    """Ward tree built in canonical patient order, with leaves mapped back to
    bank indices. Distance ties then resolve the same way however the bank
    is ordered."""
    if matrix.n != len(bank):
        raise ValueError(f"matrix has {matrix.n} rows, bank has {len(bank)} sequences")
    order = canonical_order(bank)
    return ward_linkage(matrix.take(order), method=method).relabel_leaves(order)


def _union_labels(dendrogram: Dendrogram, n_merges: int) -> list[list[int]]:
    n = dendrogram.n_leaves
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t in range(n_merges):
        m = dendrogram.merges[t]
        parent[find(m.left)] = n + t
        parent[find(m.right)] = n + t
    groups: dict[int, list[int]] = {}
    for leaf in range(n):
        groups.setdefault(find(leaf), []).append(leaf)
    return sorted(groups.values(), key=lambda g: g[0])


def cut(dendrogram: Dendrogram, k: int) -> list[list[int]]:
    """Partition into k groups by undoing the last k-1 merges.

    Groups are returned ordered by their smallest leaf.
    """
    if not 1 <= k <= dendrogram.n_leaves:
        raise ValueError(f"k must be in [1, {dendrogram.n_leaves}], got {k}")
    return _union_labels(dendrogram, dendrogram.n_leaves - k)


def bisect_group(dendrogram: Dendrogram, members) -> tuple[list[int], list[int]]:
    """Split a set of leaves at the topmost merge of the tree induced on it."""
    members = sorted(set(int(m) for m in members))
    if len(members) < 2:
        raise ValueError("cannot bisect a group with fewer than 2 members")
    n = dendrogram.n_leaves
    parent = list(range(2 * n - 1))
    count = [0] * (2 * n - 1)
    for m in members:
        count[m] = 1

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    last = None
    for t, mg in enumerate(dendrogram.merges):
        ra, rb = find(mg.left), find(mg.right)
        if count[ra] and count[rb]:
            last = t
        parent[ra] = parent[rb] = n + t
        count[n + t] = count[ra] + count[rb]
    mg = dendrogram.merges[last]
    left = set(dendrogram.leaves(mg.left))
    g1 = [m for m in members if m in left]
    g2 = [m for m in members if m not in left]
    return g1, g2


@dataclass(frozen=True)
class StepwiseParams:
    p_threshold: float = 0.01
    internal_support_threshold: float = 0.5
    min_subseq_len: int = 2
    max_groups: int = 16
    min_group_size: int = 30
    candidate_min_support: float = 0.05
    candidate_max_len: int = 4
    candidate_top_k: int = 50
    evidence_top: int = 5

    def __post_init__(self):
        if not 0 < self.p_threshold <= 1:
            raise ValueError("p_threshold must be in (0, 1]")
        if not 0 < self.internal_support_threshold <= 1:
            raise ValueError("internal_support_threshold must be in (0, 1]")
        for name in ("min_subseq_len", "max_groups", "min_group_size", "candidate_max_len", "candidate_top_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class GroupNode:
    node_id: int
    members: tuple[int, ...]
    parent: int | None = None
    children: tuple[int, ...] = ()
    step: int = 0
    status: str = "pending"
    reason: str = ""
    name: str | None = None
    label: str | None = None
    internal_pass: bool = False
    best_internal: SupportResult | None = None
    top_subsequences: list[SupportResult] = field(default_factory=list)
    split_passed: bool | None = None
    discrimination: list[DiscriminationResult] = field(default_factory=list)

    @property
    def size(self):
        return len(self.members)

    @property
    def is_leaf(self):
        return not self.children


@dataclass
class GroupTree:
    nodes: dict[int, GroupNode]
    n_patients: int
    params: StepwiseParams

    @property
    def root(self) -> GroupNode:
        return self.nodes[0]

    def leaves(self) -> list[GroupNode]:
        return [nd for _, nd in sorted(self.nodes.items()) if nd.is_leaf]

    def labels(self) -> np.ndarray:
        """Leaf index (0-based, in leaf order) for every patient."""
        out = np.full(self.n_patients, -1, dtype=np.int64)
        for k, leaf in enumerate(self.leaves()):
            out[list(leaf.members)] = k
        return out

    def to_json(self, bank: SequenceBank | None = None) -> dict:
        ids = bank.patient_ids if bank is not None else None

        def node_json(nd: GroupNode):
            return {
                "node_id": nd.node_id,
                "name": nd.name,
                "label": nd.label,
                "parent": nd.parent,
                "children": list(nd.children),
                "step": nd.step,
                "size": nd.size,
                "status": nd.status,
                "reason": nd.reason,
                "members": [ids[m] for m in nd.members] if ids else list(nd.members),
                "internal": {
                    "passed": nd.internal_pass,
                    "best": nd.best_internal.to_json() if nd.best_internal else None,
                    "top_subsequences": [r.to_json() for r in nd.top_subsequences],
                },
                "split": None if nd.split_passed is None else {
                    "passed": nd.split_passed,
                    "discriminative": [r.to_json() for r in nd.discrimination],
                },
            }

        return {
            "n_patients": self.n_patients,
            "params": self.params.__dict__,
            "leaves": [nd.node_id for nd in self.leaves()],
            "nodes": [node_json(nd) for _, nd in sorted(self.nodes.items())],
        }

    def write_membership_csv(self, bank: SequenceBank, path) -> None:
        rows = []
        for leaf in self.leaves():
            rows.extend((bank[m].patient_id, leaf.name, m) for m in leaf.members)
        rows.sort(key=lambda r: r[2])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["patient_id", "group_id"])
            w.writerows(r[:2] for r in rows)


def _internal_check(seqs, params: StepwiseParams, node: GroupNode) -> None:
    L = params.min_subseq_len
    mined = mine_frequent(seqs, min(1.0, 1.0 / len(seqs)), L)
    at_len = [r for r in mined if len(r.pattern) == L]
    node.best_internal = at_len[0] if at_len else None
    node.internal_pass = bool(at_len) and at_len[0].support >= params.internal_support_threshold - 1e-12
    node.top_subsequences = mine_frequent(seqs, params.candidate_min_support, params.candidate_max_len)[
        : params.evidence_top
    ]


def stepwise_cluster(
    bank: SequenceBank,
    matrix: CondensedDistanceMatrix | None = None,
    params: StepwiseParams | None = None,
    dendrogram: Dendrogram | None = None,
) -> GroupTree:
    """Grow a group tree by bisecting unqualified groups along the Ward tree.

    Each split must be externally valid (some candidate pattern separates the
    two halves at p <= p_threshold); each resulting half is then qualified
    when its most common pattern of length min_subseq_len reaches the
    internal support threshold. The largest unqualified group is split next.
    """
    params = params or StepwiseParams()
    if dendrogram is None:
        if matrix is None:
            raise ValueError("need a distance matrix or a dendrogram")
        dendrogram = canonical_linkage(bank, matrix)
    n = len(bank)
    if dendrogram.n_leaves != n:
        raise ValueError(f"dendrogram has {dendrogram.n_leaves} leaves, bank has {n} sequences")
    seqs = [s.events for s in bank]

    root = GroupNode(0, tuple(range(n)))
    _internal_check(seqs, params, root)
    nodes = {0: root}
    queue = [root]
    n_leaves = 1
    step = 0
    while queue and n_leaves < params.max_groups:
        queue.sort(key=lambda nd: (-nd.size, nd.node_id))
        node = queue.pop(0)
        if node.size < max(2, params.min_group_size):
            node.status, node.reason = "unsplittable", f"size {node.size} below min_group_size"
            continue
        g1, g2 = bisect_group(dendrogram, node.members)
        s1, s2 = [seqs[i] for i in g1], [seqs[i] for i in g2]
        cands = candidate_patterns(s1, s2, params.candidate_min_support, params.candidate_max_len,
                                   params.candidate_top_k)
        disc = discriminate(s1, s2, cands)
        node.split_passed = any(r.p_value <= params.p_threshold and not r.degenerate for r in disc)
        node.discrimination = disc[: max(params.evidence_top, 4)]
        if not node.split_passed:
            if node.internal_pass:
                node.status, node.reason = "qualified", "split not externally valid; group passes internally"
            else:
                node.status, node.reason = "unsplittable", "split failed external validation"
            continue
        step += 1
        node.status = "split"
        kids = []
        for members in (g1, g2):
            child = GroupNode(len(nodes), tuple(members), parent=node.node_id, step=step)
            nodes[child.node_id] = child
            kids.append(child.node_id)
            _internal_check([seqs[i] for i in members], params, child)
            if child.internal_pass:
                child.status = "qualified"
            elif child.size < max(2, params.min_group_size):
                child.status, child.reason = "unsplittable", f"size {child.size} below min_group_size"
            else:
                child.status = "unqualified"
                queue.append(child)
        node.children = tuple(kids)
        n_leaves += 1
    for node in queue:
        node.status, node.reason = "unqualified", "max_groups reached"
    tree = GroupTree(nodes, n, params)
    for k, leaf in enumerate(tree.leaves(), start=1):
        leaf.name = f"GRP{k}"
    return tree


@dataclass(frozen=True)
class GroupStats:
    n_patients: int
    pct_patients: float
    n_events: int
    pct_events: float
    min_events: int
    max_events: int
    mean_events: float
    median_events: float
    mean_time: float | None
    median_time: float | None
    mean_span: float | None
    median_span: float | None

    def to_row(self) -> dict:
        return dict(self.__dict__)


def group_stats(group, bank: SequenceBank) -> GroupStats:
    """Table-style summary of one group: sizes, events per patient, timing.

    `group` is a list of bank indices. Timing fields are None when any
    member lacks times.
    """
    members = [bank[i] for i in group]
    if not members:
        raise ValueError("empty group")
    lengths = [len(s) for s in members]
    n_events = sum(lengths)
    timed = all(s.times is not None for s in members)
    if timed:
        times = [t for s in members for t in s.times]
        spans = [s.times[-1] - s.times[0] for s in members]
    return GroupStats(
        n_patients=len(members),
        pct_patients=100.0 * len(members) / len(bank),
        n_events=n_events,
        pct_events=100.0 * n_events / bank.n_events(),
        min_events=min(lengths),
        max_events=max(lengths),
        mean_events=statistics.fmean(lengths),
        median_events=float(statistics.median(lengths)),
        mean_time=statistics.fmean(times) if timed else None,
        median_time=float(statistics.median(times)) if timed else None,
        mean_span=statistics.fmean(spans) if timed else None,
        median_span=float(statistics.median(spans)) if timed else None,
    )


def write_tree_json(tree: GroupTree, bank: SequenceBank, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tree.to_json(bank), fh, indent=2, sort_keys=True)
        fh.write("\n")


def summarize_leaf(node: GroupNode) -> str:
    best = node.best_internal
    pat = f"{format_pattern(best.pattern)}={best.support:.2f}" if best else "-"
    return f"{node.name}: n={node.size} status={node.status} best={pat}"
