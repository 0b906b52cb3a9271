"""trajmine command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from trajmine import pipeline as pl
from trajmine.config import PipelineConfig
from trajmine.model import IngestError, write_events_csv
from trajmine.simulate import GeneratorSpec, planted_three_group_spec, simulate, write_labels_csv

log = logging.getLogger("trajmine")

# flag -> config field
_OVERRIDES = {
    "input": "input", "alphabet": "alphabet", "out": "out", "seed": "seed",
    "p_threshold": "p_threshold", "internal_support": "internal_support", "min_support": "min_support",
    "max_len": "max_len", "prob_threshold": "prob_threshold", "freq_threshold": "freq_threshold",
    "max_groups": "max_groups", "min_group_size": "min_group_size", "workers": "workers",
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--input", help="event CSV (patient_id,code,time_months[,device_role])")
    p.add_argument("--alphabet", help="alphabet JSON (default: bundled adverse-event alphabet)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--p-threshold", type=float)
    p.add_argument("--internal-support", type=float)
    p.add_argument("--min-support", type=float)
    p.add_argument("--max-len", type=int)
    p.add_argument("--prob-threshold", type=float)
    p.add_argument("--freq-threshold", type=int)
    p.add_argument("--max-groups", type=int)
    p.add_argument("--min-group-size", type=int)
    p.add_argument("--workers", type=int, help="thread cap (also TRAJMINE_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajmine", description="Sequential pattern mining of event trajectories.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("ingest", "parse the event CSV into bank.json"),
        ("distances", "pairwise LCS dissimilarities (distances.bin, distance_stats.json)"),
        ("cluster", "Ward clustering; step-wise validated groups, or a plain cut with --groups"),
        ("mine", "frequent subsequences per group"),
        ("discriminate", "chi-square discriminative subsequences between two groups"),
        ("markov", "transition models and thresholded chains per group"),
        ("render", "DOT files from chains_*.json"),
        ("stats", "event frequency, group statistics and position histograms"),
        ("pipeline", "run every stage and write manifest.json"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _common(p)
        if name == "cluster":
            p.add_argument("--groups", type=int, help="plain dendrogram cut into N groups")
        if name == "discriminate":
            p.add_argument("--g1", required=True)
            p.add_argument("--g2", required=True)
        if name == "pipeline":
            p.add_argument("--verify", action="store_true", help="check files against an existing manifest")
    p = sub.add_parser("simulate", help="sample a synthetic bank from a generator spec")
    p.add_argument("--spec", help="generator spec JSON (default: planted three-group preset)")
    p.add_argument("--n", type=int, default=900, help="patients for the preset")
    p.add_argument("--noise", type=float, default=0.1, help="cross-noise for the preset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alphabet")
    p.add_argument("--out", required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args) -> PipelineConfig:
    overrides = {field: getattr(args, flag, None) for flag, field in _OVERRIDES.items()}
    return PipelineConfig.load(args.config, **overrides)


def _cmd_simulate(args) -> int:
    from trajmine.model import EventAlphabet

    alphabet = EventAlphabet.from_json(args.alphabet) if args.alphabet else EventAlphabet.default()
    if args.spec:
        spec = GeneratorSpec.load(args.spec)
        spec = GeneratorSpec(spec.groups, spec.n_patients, args.seed, spec.max_length, spec.time_first_mean,
                             spec.time_gap_mean)
    else:
        spec = planted_three_group_spec(args.n, args.seed, args.noise, alphabet)
    bank, labels = simulate(spec, alphabet)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_events_csv(bank, out / "events.csv")
    write_labels_csv(labels, out / "labels.csv")
    with open(out / "generator_spec.json", "w", encoding="utf-8") as fh:
        json.dump(spec.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(bank)} sequences to {out / 'events.csv'}")
    return 0


def run(args) -> int:
    if args.command == "simulate":
        return _cmd_simulate(args)
    cfg = _config(args)
    out = Path(cfg.out)
    if args.command == "pipeline" and args.verify:
        bad = pl.verify_manifest(out)
        for f in bad:
            print(f"MISMATCH {f}")
        print("manifest verified" if not bad else f"{len(bad)} file(s) differ")
        return 0 if not bad else 1
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "pipeline":
        res = pl.run_pipeline(cfg)
        print(f"pipeline ok: {len(res.tree.leaves())} groups, {len(res.manifest['files'])} files in {out}")
        return 0

    bank = pl.load_bank(cfg)
    if args.command == "ingest":
        pl.stage_ingest(cfg, out, bank)
    elif args.command == "distances":
        m = pl.stage_distances(cfg, out, bank)
        print(f"{m.n} sequences, {m.values.size} pairs")
    elif args.command == "cluster":
        tree = pl.stage_cluster(cfg, out, bank, pl.cached_matrix(cfg, out, bank), groups=args.groups)
        if tree is not None:
            from trajmine.clustering import summarize_leaf

            for leaf in tree.leaves():
                print(summarize_leaf(leaf))
    elif args.command == "mine":
        pl.stage_mine(cfg, out, bank)
    elif args.command == "discriminate":
        for r in pl.stage_discriminate(cfg, out, bank, args.g1, args.g2)[:10]:
            print(f"{'-'.join(r.pattern):30s} chi2={r.chi2:10.3f} p={r.p_value:.3e} {r.residual_sign_g1}")
    elif args.command == "markov":
        pl.stage_markov(cfg, out, bank)
    elif args.command == "render":
        pl.stage_render(cfg, out, bank.alphabet)
    elif args.command == "stats":
        pl.stage_stats(cfg, out, bank)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except pl.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IngestError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
