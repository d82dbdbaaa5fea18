"""Command-line entry point: ``hetnids <subcommand> [flags]``.

Subcommands: synth, prepare, train, baseline, report, selftest. Errors are
printed to stderr as a single ``error: <kind>: <message>`` line.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from hetnids import __version__
from hetnids.config import ConfigError, ExperimentConfig, config_from_dict, file_sha256, parse_config
from hetnids.dataprep.datasets import DomainDataset
from hetnids.dataprep.synth import synth_pair
from hetnids.dataprep.tables import binarize_labels, clean, load_flow_csv
from hetnids.evalharness import (
    domains_from_tables,
    export_report,
    prepare_domains,
    run_experiment,
)
from hetnids.model import (
    build_model,
    save_model,
    train_baseline,
    train_cyclic,
)
from hetnids import nncore, selftest
from hetnids.seeding import derive_seed

log = logging.getLogger("hetnids")
EXIT_CONFIG, EXIT_RUNTIME = 2, 1


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = EXIT_RUNTIME):
        super().__init__(message)
        self.kind, self.code = kind, code


class _Parser(argparse.ArgumentParser):
    """Usage errors as one stderr line, like every other failure."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)  # a misspelled flag must not match a prefix
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.exit(EXIT_CONFIG, f"error: usage: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hetnids", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file or preset name (synth_default)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--combination", type=int, help="Sr# of the feature-combination table")
        p.add_argument("--csv", nargs="+", metavar="PATH", help="flow CSVs, one per dataset")
        p.add_argument("--label-column", help="label column name")
        p.add_argument("--fractions", type=float, nargs="+")
        p.add_argument("--repeats", type=int)
        p.add_argument("--max-cycles", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--jobs", type=int)
        p.add_argument("-v", "--verbose", action="store_true")

    for name, help_ in (
        ("synth", "write a synthetic domain pair as CSVs"),
        ("prepare", "materialise prepared splits and a manifest"),
        ("train", "train the private/shared model with the cyclic procedure"),
        ("baseline", "train per-domain baseline classifiers"),
        ("report", "run the repeated experiment and write report files"),
    ):
        common(sub.add_parser(name, help=help_))
    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(args.config, check_files=False)
        raw = json.loads(cfg.source_text)
    else:
        raw = {}
    if args.combination is not None:
        raw["combination"] = args.combination
        raw.setdefault("mode", "csv")
        raw.pop("datasets", None)
        raw.pop("feature_ids", None)
    if args.csv:
        raw["csv_paths"] = [str(Path(p).resolve()) for p in args.csv]
        raw.setdefault("mode", "csv")
    if args.label_column:
        raw["label_column"] = args.label_column
    for flag, key in (("seed", "base_seed"), ("repeats", "repeats"), ("jobs", "jobs"),
                      ("fractions", "fractions")):
        val = getattr(args, flag)
        if val is not None:
            raw[key] = val
    train = dict(raw.get("train", {}))
    for flag, key in (("max_cycles", "max_cycles"), ("alpha", "alpha"), ("beta", "beta")):
        val = getattr(args, flag)
        if val is not None:
            train[key] = val
    if train:
        raw["train"] = train
    if args.out:
        raw["output_dir"] = args.out
    base_dir = Path(args.config).parent if args.config and Path(args.config).is_file() else None
    return config_from_dict(raw, base_dir, True, json.dumps(raw, indent=2))


def _load_domains(cfg: ExperimentConfig, seed: int) -> tuple[list[DomainDataset], dict]:
    """Raw (unsplit) domains and input hashes."""
    if cfg.mode == "synthetic":
        return synth_pair(cfg.synthetic, derive_seed(seed, "synth")), {}
    spec = cfg.cross_domain_spec()
    tables, hashes = {}, {}
    for name, path in cfg.dataset_paths().items():
        log.info("loading %s from %s", name, path)
        tables[name] = binarize_labels(clean(load_flow_csv(path, cfg.label_column)),
                                       cfg.normal_token)
        hashes[name] = {"path": path, "sha256": file_sha256(path)}
    return domains_from_tables(spec, tables), hashes


def _manifest(cfg: ExperimentConfig, out: Path, command: str, extra: dict) -> Path:
    doc = {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "config_source": cfg.source_text,
        "seed_derivation": "run r uses base_seed + r; stage seeds = derive_seed(run_seed, stage, domain)",
        **extra,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


def _write_domain_csv(ds: DomainDataset, path: Path):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{fid}" for fid in ds.feature_ids] + ["label"])
        for row, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(y)])


def cmd_synth(cfg: ExperimentConfig, out: Path):
    domains = synth_pair(cfg.synthetic, derive_seed(cfg.base_seed, "synth"))
    files = []
    for ds in domains:
        path = out / f"{ds.name}.csv"
        _write_domain_csv(ds, path)
        files.append({"name": ds.name, "file": path.name, "rows": ds.n, "dims": ds.d})
    _manifest(cfg, out, "synth", {"domains": files})
    print(f"wrote {len(files)} synthetic domains to {out}")


def _prepared(cfg: ExperimentConfig, seed: int):
    raw, input_hashes = _load_domains(cfg, seed)
    return prepare_domains(raw, cfg.fractions[0], seed, tuple(cfg.split_ratios), cfg.smote_k), \
        input_hashes, [d.feature_ids for d in raw]


def cmd_prepare(cfg: ExperimentConfig, out: Path):
    seed = cfg.base_seed
    prepared, input_hashes, _ = _prepared(cfg, seed)
    domains = []
    for k, p in enumerate(prepared):
        arrays = {}
        for split in ("train", "val", "test"):
            ds = getattr(p, split)
            arrays[f"{split}_X"], arrays[f"{split}_y"] = ds.features, ds.labels
        fname = f"domain{k}.npz"
        np.savez(out / fname, **arrays)
        domains.append({
            "domain": k, "name": p.name, "file": fname,
            "feature_ids": p.train.feature_ids,
            "counts": {s: dict(zip(("normal", "attack"), getattr(p, s).class_counts()))
                       for s in ("train", "val", "test")},
            "scaler": {"means": p.scaler_means, "stds": p.scaler_stds},
            "hashes": p.hashes(),
        })
    _manifest(cfg, out, "prepare", {"run_seed": seed, "fraction": cfg.fractions[0],
                                    "inputs": input_hashes, "domains": domains})
    print(f"prepared {len(domains)} domains in {out}")


def cmd_train(cfg: ExperimentConfig, out: Path):
    seed = cfg.base_seed
    prepared, input_hashes, fids = _prepared(cfg, seed)
    tcfg = replace(cfg.train, seed=derive_seed(seed, "proposed"))
    model = build_model([p.train.d for p in prepared], tcfg)
    model, hist = train_cyclic(model, [(p.train, p.val) for p in prepared], tcfg)
    save_model(model, out / "model", [p.name for p in prepared], fids,
               {"best_cycle": hist.best_cycle, "best_mean_val_accuracy": hist.best_score})
    hist.write_epoch_csv(out / "history.csv")
    hist.write_mmd_trace_csv(out / "mmd_trace.csv")
    _manifest(cfg, out, "train", {"run_seed": seed, "train_seed": tcfg.seed,
                                  "inputs": input_hashes, "best_cycle": hist.best_cycle,
                                  "best_mean_val_accuracy": hist.best_score,
                                  "data_hashes": {p.name: p.hashes() for p in prepared}})
    print(f"best mean validation accuracy {hist.best_score:.4f} at cycle {hist.best_cycle}")


def cmd_baseline(cfg: ExperimentConfig, out: Path):
    seed = cfg.base_seed
    prepared, input_hashes, _ = _prepared(cfg, seed)
    results = []
    for k, p in enumerate(prepared):
        bcfg = replace(cfg.baseline, seed=derive_seed(seed, "baseline", k))
        net, hist = train_baseline(p.train, p.val, bcfg)
        nncore.save_checkpoint(out / f"baseline_{k}.npz", net,
                               extra={"domain": p.name, "feature_ids": p.train.feature_ids})
        hist.write_epoch_csv(out / f"baseline_{k}_history.csv")
        results.append({"domain": p.name, "best_epoch": hist.best_cycle,
                        "best_val_accuracy": hist.best_score})
        print(f"{p.name}: best validation accuracy {hist.best_score:.4f}")
    _manifest(cfg, out, "baseline", {"run_seed": seed, "inputs": input_hashes,
                                     "results": results})


def cmd_report(cfg: ExperimentConfig, out: Path):
    tables, input_hashes = None, {}
    if cfg.mode == "synthetic":
        source = cfg.synthetic
    else:
        source = cfg.cross_domain_spec()
        tables = {}
        for name, path in cfg.dataset_paths().items():
            tables[name] = binarize_labels(clean(load_flow_csv(path, cfg.label_column)),
                                           cfg.normal_token)
            input_hashes[name] = {"path": path, "sha256": file_sha256(path)}
    report = run_experiment(source, cfg.fractions, cfg.repeats, cfg.base_seed, cfg.train,
                            cfg.baseline, tables=tables, ratios=tuple(cfg.split_ratios),
                            smote_k=cfg.smote_k, jobs=cfg.jobs)
    export_report(report, out)
    _manifest(cfg, out, "report", {"inputs": input_hashes, "seeds": report.seeds})
    for row in report.aggregates():
        if row["metric"] == "accuracy":
            mean = "nan" if row["mean"] is None else f"{row['mean']:.4f}"
            std = "nan" if row["std"] is None else f"{row['std']:.4f}"
            print(f"{row['model']:9s} {row['domain']:12s} f={row['fraction']:<5} "
                  f"accuracy {mean} +- {std}")


COMMANDS = {"synth": cmd_synth, "prepare": cmd_prepare, "train": cmd_train,
            "baseline": cmd_baseline, "report": cmd_report}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selftest":
            return 0 if selftest.run_all() else EXIT_RUNTIME
        try:
            cfg = _load_config(args)
        except ConfigError as exc:
            raise CliError("config", str(exc), EXIT_CONFIG) from None
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out)
        return 0
    except CliError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, ValueError, KeyError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
