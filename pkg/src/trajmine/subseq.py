"""Frequent gapped subsequences with per-patient support, and chi-square
discrimination of subsequences between two groups."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

from trajmine.model import Sequence

Subsequence = tuple  # tuple of event codes

_EPS = 1e-12


def format_pattern(pattern) -> str:
    return "-".join(pattern)


def parse_pattern(text: str) -> tuple:
    return tuple(p for p in text.split("-") if p)


def _events(s):
    return s.events if isinstance(s, Sequence) else tuple(s)


def contains(seq, pattern) -> bool:
    """True when `pattern` occurs in `seq` in order, gaps allowed."""
    it = iter(_events(seq))
    return all(code in it for code in pattern)


@dataclass(frozen=True)
class SupportResult:
    pattern: tuple
    count: int
    support: float

    def to_json(self):
        return {"pattern": format_pattern(self.pattern), "length": len(self.pattern),
                "count": self.count, "support": self.support}


def _rank_key(r: SupportResult):
    return (-r.count, len(r.pattern), r.pattern)


def mine_frequent(sequences, min_support: float, max_len: int) -> list[SupportResult]:
    """All patterns up to `max_len` codes whose support reaches `min_support`.

    Patterns grow one code at a time down a prefix tree. Each node keeps,
    per supporting sequence, the end of the leftmost match of its prefix;
    a child is supported by a sequence iff its code occurs after that point.
    Nodes below `min_support` are not expanded since no extension can do
    better.
    """
    seqs = [_events(s) for s in sequences]
    n = len(seqs)
    if n == 0:
        raise ValueError("cannot mine an empty group")
    if not 0 < min_support <= 1:
        raise ValueError(f"min_support must be in (0, 1], got {min_support}")
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")

    results = []
    # stack of (prefix, projection), projection = [(seq index, resume position)]
    stack = [((), [(i, 0) for i in range(n)])]
    while stack:
        prefix, proj = stack.pop()
        ext: dict[str, list] = {}
        for i, start in proj:
            s = seqs[i]
            seen = set()
            for pos in range(start, len(s)):
                c = s[pos]
                if c not in seen:
                    seen.add(c)
                    ext.setdefault(c, []).append((i, pos + 1))
        for code in sorted(ext, reverse=True):
            child_proj = ext[code]
            if len(child_proj) / n < min_support - _EPS:
                continue
            pattern = prefix + (code,)
            results.append(SupportResult(pattern, len(child_proj), len(child_proj) / n))
            if len(pattern) < max_len:
                stack.append((pattern, child_proj))
    results.sort(key=_rank_key)
    return results


def support(sequences, pattern) -> SupportResult:
    seqs = list(sequences)
    count = sum(contains(s, pattern) for s in seqs)
    return SupportResult(tuple(pattern), count, count / len(seqs))


@dataclass(frozen=True)
class DiscriminationResult:
    pattern: tuple
    chi2: float
    p_value: float
    residual_sign_g1: str
    support_g1: float
    support_g2: float
    table: tuple  # ((g1 with, g1 without), (g2 with, g2 without))
    degenerate: bool = False

    def to_json(self):
        d = asdict(self)
        d["pattern"] = format_pattern(self.pattern)
        d["table"] = [list(r) for r in self.table]
        return d


def chi2_sf_1dof(x: float) -> float:
    """Upper tail of the chi-square(1) distribution.

    Q(1/2, x/2) of the regularized incomplete gamma reduces to erfc(sqrt(x/2)).
    """
    if x <= 0:
        return 1.0
    return math.erfc(math.sqrt(x / 2.0))


def pearson_2x2(a: int, b: int, c: int, d: int):
    """Chi-square statistic, p-value, G1 residual sign and degeneracy flag for
    the table [[a, b], [c, d]] (rows groups, columns with/without pattern).

    No continuity correction.
    """
    n = a + b + c + d
    margins = ((a + b), (c + d), (a + c), (b + d))
    sign_num = a * n - (a + b) * (a + c)  # n * (observed - expected)
    sign = "+" if sign_num > 0 else "-" if sign_num < 0 else "0"
    if n == 0 or 0 in margins:
        return 0.0, 1.0, sign, True
    chi2 = n * (a * d - b * c) ** 2 / (margins[0] * margins[1] * margins[2] * margins[3])
    return float(chi2), chi2_sf_1dof(chi2), sign, False


def candidate_patterns(g1, g2, min_support=0.05, max_len=4, top_k=50) -> list[tuple]:
    """Union of the top-k frequent patterns of each group, in stable order."""
    out = {}
    for grp in (g1, g2):
        for r in mine_frequent(grp, min_support, max_len)[:top_k]:
            out.setdefault(r.pattern, None)
    return list(out)


def discriminate(g1, g2, candidates=None, *, min_support=0.05, max_len=4, top_k=50) -> list[DiscriminationResult]:
    """Rank candidate patterns by how well presence separates g1 from g2."""
    g1 = [_events(s) for s in g1]
    g2 = [_events(s) for s in g2]
    if not g1 or not g2:
        raise ValueError("both groups must be non-empty")
    if candidates is None:
        candidates = candidate_patterns(g1, g2, min_support, max_len, top_k)
    out = []
    for pat in candidates:
        pat = tuple(pat)
        a = sum(contains(s, pat) for s in g1)
        c = sum(contains(s, pat) for s in g2)
        b, d = len(g1) - a, len(g2) - c
        chi2, p, sign, degenerate = pearson_2x2(a, b, c, d)
        out.append(DiscriminationResult(pat, chi2, p, sign, a / len(g1), c / len(g2), ((a, b), (c, d)), degenerate))
    out.sort(key=lambda r: (r.p_value, -r.chi2, len(r.pattern), r.pattern))
    return out


def write_support_csv(results, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pattern", "length", "count", "support"])
        for r in results:
            w.writerow([format_pattern(r.pattern), len(r.pattern), r.count, f"{r.support:.6f}"])


def write_discrimination_csv(results, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pattern", "chi2", "p_value", "residual_sign_g1", "support_g1", "support_g2", "degenerate"])
        for r in results:
            w.writerow([format_pattern(r.pattern), f"{r.chi2:.6f}", f"{r.p_value:.6e}", r.residual_sign_g1,
                        f"{r.support_g1:.6f}", f"{r.support_g2:.6f}", int(r.degenerate)])


def write_json(results, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_json() for r in results], fh, indent=2, sort_keys=True)
        fh.write("\n")
