"""Acceptance criteria, one test each. Every test records PASS/FAIL through
the `acceptance` fixture; the terminal summary prints the tally."""

import json
import random
import time
import warnings
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from conftest import random_codes
from oracles import chi2_closed_form, lcs_bruteforce, mine_bruteforce
from trajmine import pipeline as pl
from trajmine.clustering import Merge, lance_williams_ward, ward_linkage
from trajmine.config import PipelineConfig
from trajmine.distance import CondensedDistanceMatrix, dissimilarity, distance_matrix, lcs_length
from trajmine.markov import extract_chains, fit_transitions
from trajmine.model import Sequence, SequenceBank, write_events_csv
from trajmine.simulate import GeneratorSpec, GroupSpec, planted_three_group_spec, simulate, write_labels_csv
from trajmine.subseq import chi2_sf_1dof, mine_frequent, pearson_2x2


def test_01_worked_pair(acceptance, worked_pair):
    p1, p2 = worked_pair
    lcs_length(p1, p2)  # warm
    t0 = time.perf_counter()
    lcs, d = lcs_length(p1, p2), dissimilarity(p1, p2)
    elapsed = time.perf_counter() - t0
    acceptance.check(1, "worked pair B-I-R-Death vs B-B-I: LCS 2, d 3, < 1 ms", lcs == 2 and d == 3 and elapsed < 1e-3,
                     f"lcs={lcs} d={d} t={elapsed * 1e6:.0f}us")


def test_02_lcs_oracle(acceptance):
    rng = random.Random(2)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        a, b = random_codes(rng, 4, 8, 0), random_codes(rng, 4, 8, 0)
        bad += lcs_length(a, b) != lcs_bruteforce(a, b)
    elapsed = time.perf_counter() - t0
    acceptance.check(2, "LCS equals exhaustive enumeration on 1000 pairs, < 10 s", bad == 0 and elapsed < 10,
                     f"mismatches={bad} t={elapsed:.2f}s")


def test_03_metric_suite(acceptance):
    rng = random.Random(3)
    failures = Counter()
    for _ in range(500):
        a, b, c = (random_codes(rng, 4, 8, 0) for _ in range(3))
        dab, dba, dbc, dac = dissimilarity(a, b), dissimilarity(b, a), dissimilarity(b, c), dissimilarity(a, c)
        failures["identity"] += dissimilarity(a, a) != 0 or ((dab == 0) != (a == b))
        failures["symmetry"] += dab != dba
        failures["triangle"] += dac > dab + dbc
        failures["parity"] += (dab - len(a) - len(b)) % 2 != 0
    acceptance.check(3, "metric axioms and parity on 500 triples", sum(failures.values()) == 0, dict(failures))


def test_04_ward_fixture(acceptance):
    # points 0..3; d01=1 d02=4 d03=5 d12=4 d13=5 d23=2, merges derived by hand
    four = CondensedDistanceMatrix(4, [1, 4, 5, 4, 5, 2])
    expected = [Merge(0, 1, 1.0, 2), Merge(2, 3, 2.0, 2), Merge(4, 5, 7.5, 4)]
    trees_ok = all(list(ward_linkage(four, m).merges) == expected for m in ("nn_chain", "greedy"))
    rng = random.Random(4)
    worst = 0.0
    for _ in range(1000):
        dik, djk, dij = (rng.uniform(0, 100) for _ in range(3))
        ref = (2 / 3) * dik + (2 / 3) * djk - (1 / 3) * dij
        worst = max(worst, abs(lance_williams_ward(dik, djk, dij, 1, 1, 1) - ref))
    acceptance.check(4, "hand-derived 4-point Ward tree; three-singleton identity to 1e-12",
                     trees_ok and worst <= 1e-12, f"trees_ok={trees_ok} max_err={worst:.1e}")


def test_05_monotone_heights(acceptance):
    rng = random.Random(5)
    bad = 0
    for k in range(100):
        n = rng.randint(2, 50)
        hi = 6 if k % 2 else 10**6  # alternate tie-heavy and generic matrices
        m = CondensedDistanceMatrix(n, [rng.randint(0, hi) for _ in range(n * (n - 1) // 2)])
        for method in ("nn_chain", "greedy"):
            h = ward_linkage(m, method).heights
            bad += not all(h[i] <= h[i + 1] for i in range(len(h) - 1))
    acceptance.check(5, "non-decreasing merge heights on 100 random matrices", bad == 0, f"violations={bad}")


def test_06_mining_oracle(acceptance):
    rng = random.Random(6)
    seqs = [random_codes(rng, 5, 10) for _ in range(50)]
    got = {r.pattern: r.count for r in mine_frequent(seqs, 0.1, 3)}
    exact = got == mine_bruteforce(seqs, "ABCDE", 0.1, 3)
    sup = {r.pattern: r.support for r in mine_frequent(seqs, 0.1, 3)}
    anti = 0
    for pat, s in sup.items():
        for ext in (pat + (c,) for c in "ABCDE"):
            if ext in sup and sup[ext] > s:
                anti += 1
        for k in range(len(pat)):
            if sup.get(pat[:k] + pat[k + 1:], 1.0) < s:
                anti += 1
    acceptance.check(6, "mining equals exhaustive enumeration; anti-monotone", exact and anti == 0,
                     f"patterns={len(got)} exact={exact} anti_violations={anti}")


def test_07_chi_square(acceptance):
    chi2, p, _, _ = pearson_2x2(30, 0, 0, 30)
    perfect = chi2 == 60.0 == chi2_closed_form(30, 0, 0, 30) and p < 1e-10
    homog = all(pearson_2x2(*t)[:2] == (0.0, 1.0) for t in [(10, 20, 5, 10), (7, 7, 7, 7), (3, 9, 1, 3)])
    worst = 0.0
    for x in np.concatenate([np.logspace(-6, 2.1, 200), [2.706, 3.841, 6.635, 10.828]]):
        ref = stats.chi2.sf(x, 1)
        worst = max(worst, abs(chi2_sf_1dof(float(x)) - ref) / ref)
    acceptance.check(7, "chi2 60 with p<1e-10; homogeneous 0/1; p rel. err <= 1e-8",
                     perfect and homog and worst <= 1e-8, f"chi2={chi2} p={p:.2e} max_rel_err={worst:.1e}")


def test_08_markov_stochastic(acceptance):
    rng = random.Random(8)
    banks = [[random_codes(rng, 4, 9) for _ in range(rng.randint(1, 200))] for _ in range(30)]
    banks.append(list(simulate(planted_three_group_spec(600, seed=8))[0]))
    worst, conservation = 0.0, 0
    for seqs in banks:
        m = fit_transitions(seqs)
        inflow = Counter()
        for (_, dst), c in m.counts.items():
            inflow[dst] += c
        starts = Counter(s[0] if isinstance(s, tuple) else s.events[0] for s in seqs)
        for s in m.states:
            total = sum(t.probability for t in m.outgoing(s)) + m.end_mass(s)
            worst = max(worst, abs(total - 1.0))
            first = starts[s.code] if s.position == 1 else 0
            conservation += inflow[s] + first != m.occurrences[s]
    acceptance.check(8, "row sums within 1e-9; exact count conservation", worst <= 1e-9 and conservation == 0,
                     f"max_dev={worst:.1e} conservation_violations={conservation}")


PLANTED_CHAIN = GroupSpec(
    "chain",
    1.0,
    {"BLD": 0.6, "INF": 0.4},
    [{"BLD": {"BLD": 0.5, "INF": 0.2, "DTH": 0.1}, "INF": {"BLD": 0.3, "INF": 0.3, "DTH": 0.2}}],
    [{"BLD": 0.2, "INF": 0.2}],
)


def test_09_parameter_recovery(acceptance):
    spec = GeneratorSpec([PLANTED_CHAIN], 500, seed=9)
    bank, _ = simulate(spec)
    again, _ = simulate(spec)
    m = fit_transitions(bank)
    checked, worst, failed = 0, 0.0, []
    # +-0.07 is ~3 SE for a state seen ~500 times; only judge states seen >= 100 times
    firsts = Counter(s.events[0] for s in bank)
    for code, p in PLANTED_CHAIN.initial.items():
        checked += 1
        err = abs(firsts[code] / len(bank) - p)
        worst = max(worst, err)
        if err > 0.07:
            failed.append(f"start {code}")
    for s in m.states:
        if s.code == "DTH":
            continue
        row, term = PLANTED_CHAIN.row(s.position, s.code)
        if m.occurrences[s] < 100:
            continue
        for dst, p in [*row.items(), (None, term)]:
            est = m.end_mass(s) if dst is None else m.probability(s, type(s)(s.position + 1, dst))
            checked += 1
            err = abs(est - p)
            worst = max(worst, err)
            if err > 0.07:
                failed.append(f"{s}->{dst}")
    ok = not failed and checked >= 20 and again.sequences == bank.sequences
    acceptance.check(9, "planted chain probabilities recovered within 0.07", ok,
                     f"checked={checked} max_err={worst:.3f} failed={failed}")


@pytest.fixture(scope="module")
def planted_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept")
    spec = planted_three_group_spec(900, seed=0, noise=0.1)
    bank, labels = simulate(spec)
    write_events_csv(bank, root / "events.csv")
    write_labels_csv(labels, root / "labels.csv")
    cfg = PipelineConfig(input=str(root / "events.csv"), out=str(root / "out"), seed=0)
    t0 = time.perf_counter()
    res = pl.run_pipeline(cfg)
    return root, cfg, res, labels, time.perf_counter() - t0


def test_10_cluster_recovery(acceptance, planted_run):
    root, _, res, labels, elapsed = planted_run
    leaves = res.tree.leaves()
    membership = pl.read_membership(root / "out" / "membership.csv", res.bank)
    majority_total = 0
    bleeding_leaf = None
    for name, members in membership.items():
        counts = Counter(labels[res.bank[i].patient_id] for i in members)
        top, c = counts.most_common(1)[0]
        majority_total += c
        if top == "recurrent_bleeding":
            bleeding_leaf = name
    purity = majority_total / len(res.bank)
    support_bb = None
    if bleeding_leaf:
        rows = json.loads((root / "out" / f"support_{bleeding_leaf}.json").read_text())
        support_bb = next((r["support"] for r in rows if r["pattern"] == "BLD-BLD"), 0.0)
    ok = len(leaves) == 3 and purity >= 0.9 and support_bb is not None and support_bb >= 0.9 and elapsed < 60
    acceptance.check(10, "900-patient planted bank: purity >= 90%, support(BLD,BLD) >= 0.9, < 60 s", ok,
                     f"leaves={len(leaves)} purity={purity:.3f} support_BB={support_bb} t={elapsed:.1f}s")


def test_11_threshold_semantics(acceptance, planted_run):
    _, _, res, _, _ = planted_run
    groups = pl.read_membership(res.out / "membership.csv", res.bank)
    violations = 0
    edges_seen = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for members in groups.values():
            m = fit_transitions([res.bank[i] for i in members])
            grid = {}
            for pt in (0.1, 0.15, 0.2, 0.3, 0.5, 0.7):
                for ft in (10, 30, 40, 50, 100):
                    g = extract_chains(m, pt, ft)
                    grid[pt, ft] = set(g.edges)
                    edges_seen += len(g.edges)
                    violations += sum(e.probability < max(pt, 0.1) or e.count < ft for e in g.edges)
            for (pt, ft), edges in grid.items():
                for (pt2, ft2), edges2 in grid.items():
                    if pt2 >= pt and ft2 >= ft and not edges2 <= edges:
                        violations += 1
    acceptance.check(11, "edges respect thresholds; raising thresholds never adds edges",
                     violations == 0 and edges_seen > 0, f"edges_checked={edges_seen} violations={violations}")


def _random_bank(n, seed):
    rng = random.Random(seed)
    codes = ["ARR", "BLD", "DMF", "HEM", "HEP", "HTN", "INF", "NEU", "REN", "RHF", "RSP"]
    from trajmine.model import EventAlphabet

    seqs = []
    for i in range(n):
        k = rng.randint(1, 9)  # mean 5
        events = tuple(rng.choice(codes) for _ in range(k))
        seqs.append(Sequence(f"{i:05d}", events, tuple(float(t + 1) for t in range(k))))
    return SequenceBank(EventAlphabet.default(), tuple(seqs))


@pytest.mark.slow
def test_12_performance(acceptance, tmp_path):
    bank = _random_bank(2000, 12)
    distance_matrix(bank.subset(range(10)))  # load compiled kernels
    t0 = time.perf_counter()
    m = distance_matrix(bank)
    t_dist = time.perf_counter() - t0
    write_events_csv(bank, tmp_path / "events.csv")
    cfg = PipelineConfig(input=str(tmp_path / "events.csv"), out=str(tmp_path / "out"), seed=0)
    t0 = time.perf_counter()
    res = pl.run_pipeline(cfg)
    t_pipe = time.perf_counter() - t0
    mean_len = bank.n_events() / len(bank)
    ok = m.n == 2000 and res.ok and t_dist < 10 and t_pipe < 120
    acceptance.check(12, "2000 sequences: distances < 10 s, pipeline < 120 s", ok,
                     f"mean_len={mean_len:.2f} distances={t_dist:.2f}s pipeline={t_pipe:.1f}s")


def test_13_determinism(acceptance, planted_run, tmp_path):
    root, cfg, res, _, _ = planted_run
    first = (res.out / "manifest.json").read_bytes()
    again = PipelineConfig(**{**cfg.to_json(), "out": str(tmp_path / "again")})
    pl.run_pipeline(again)
    second = (tmp_path / "again" / "manifest.json").read_bytes()
    acceptance.check(13, "identical config and inputs give byte-identical manifests", first == second,
                     f"manifest_bytes={len(first)}")
