"""Configuration-driven experiment runner.

Subcommands: run (scheme sweep from a config file), ber-sweep (coded-chain
BER/FER vs SNR), scene-gen (corpus files), evaluate (recompute metrics from
records). Every artifact is re-derivable from (config, seed); the run
manifest is written before the first trial. Exit codes: 0 success,
2 configuration/argument error, 3 provider failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import ConfigError, ProviderError, SemcomError
from .pipeline import (ExperimentConfig, chain_simulate, records_to_jsonl,
                       recompute_metrics, run_experiment)
from .scene import generate_corpus, scene_to_json

PROVIDERS_ENV = "SEMCOM_PROVIDERS"


def _load_json(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _write_report(outdir: Path, records: list[dict], report) -> None:
    (outdir / "records.jsonl").write_text(records_to_jsonl(records), encoding="utf-8")
    (outdir / "report.json").write_text(
        json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    with open(outdir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "trial", "symbols", "source_bits", "kn_ratio",
                         "crc_ok", "snr_est", "image_alignment", "object_alignment",
                         "text_alignment"])
        for rec in records:
            writer.writerow([
                rec["scheme"], rec["trial"], rec["symbol_count"], rec["source_bits"],
                f"{rec['kn_ratio']:.9e}", int(rec["crc_ok"]),
                f"{rec['snr_estimated']:.4f}",
                _fmt(rec.get("image_alignment")), _fmt(rec.get("object_alignment")),
                _fmt(rec.get("text_alignment"))])
    plotdir = outdir / "plotdata"
    plotdir.mkdir(exist_ok=True)
    for metric, table in report.plot_tables().items():
        (plotdir / f"{metric}.tsv").write_text(table, encoding="utf-8")


def _fmt(value) -> str:
    return "" if value is None else f"{value:.9f}"


def cmd_run(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    doc = _load_json(config_path)
    if args.seed is not None:
        doc["seed"] = args.seed
    providers_path = os.environ.get(PROVIDERS_ENV) or args.providers
    if providers_path:
        overrides = _load_json(Path(providers_path))
        merged = dict(doc.get("providers", {}))
        merged.update(overrides)
        doc["providers"] = merged
    cfg = ExperimentConfig.from_json(doc)
    for binding in cfg.providers.values():
        binding.validate()

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_path": str(config_path),
        "output_dir": str(outdir),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "tool_version": __version__,
        "resolved_seed": cfg.seed,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    records, report = run_experiment(cfg, jobs=args.jobs)
    _write_report(outdir, records, report)
    print(f"wrote {len(records)} records to {outdir}")
    return 0


def cmd_ber_sweep(args: argparse.Namespace) -> int:
    if not args.snrs:
        raise ConfigError("snr list must be nonempty")
    try:
        snrs = [float(s) for s in args.snrs.split(",") if s.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad snr list: {exc}") from exc
    if not snrs:
        raise ConfigError("snr list must be nonempty")
    if args.frames < 1:
        raise ConfigError("frames must be >= 1")

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for snr in snrs:
        result = chain_simulate(snr, args.frames, code_n=args.code_n, seed=args.seed)
        rows.append(result)
        print(f"snr={snr:6.2f} dB  ber={result['ber']:.3e}  fer={result['fer']:.3e}")
    lines = ["# coded 16QAM/AWGN chain; Monte-Carlo 95% bound on FER is "
             "about +/- 2*sqrt(fer*(1-fer)/frames)",
             "snr_db\tframes\tbit_errors\tframe_errors\tber\tfer"]
    for r in rows:
        lines.append(f"{r['snr_db']:g}\t{r['frames']}\t{r['bit_errors']}"
                     f"\t{r['frame_errors']}\t{r['ber']:.9e}\t{r['fer']:.9e}")
    (outdir / "ber_sweep.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def cmd_scene_gen(args: argparse.Namespace) -> int:
    if args.count < 1:
        raise ConfigError("count must be >= 1")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    scenes = generate_corpus(args.seed, args.count, min_objects=args.min_objects,
                             max_objects=args.max_objects)
    for i, scene in enumerate(scenes):
        path = outdir / f"scene_{i:04d}.json"
        path.write_text(json.dumps(scene_to_json(scene), sort_keys=True) + "\n",
                        encoding="utf-8")
    print(f"wrote {len(scenes)} scenes to {outdir}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    path = Path(args.records)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    records = []
    for line in lines:
        if line.strip():
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"bad record line: {exc}") from exc
    if not records:
        raise ConfigError(f"{path} holds no records")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    updated, report = recompute_metrics(records)
    _write_report(outdir, updated, report)
    print(f"recomputed metrics for {len(updated)} records into {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semcom",
        description="prompt-based semantic communication simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scheme sweep from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--providers", default=None,
                       help=f"binding file (env {PROVIDERS_ENV} overrides)")
    p_run.set_defaults(func=cmd_run)

    p_ber = sub.add_parser("ber-sweep", help="BER/FER vs SNR for the coded chain")
    p_ber.add_argument("--snrs", required=True, help="comma-separated dB values")
    p_ber.add_argument("--frames", type=int, default=1000)
    p_ber.add_argument("--code-n", type=int, default=1024)
    p_ber.add_argument("--seed", type=int, default=1)
    p_ber.add_argument("--out", default=".")
    p_ber.set_defaults(func=cmd_ber_sweep)

    p_gen = sub.add_parser("scene-gen", help="generate a scene corpus")
    p_gen.add_argument("--seed", type=int, default=1)
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--min-objects", type=int, default=1)
    p_gen.add_argument("--max-objects", type=int, default=16)
    p_gen.set_defaults(func=cmd_scene_gen)

    p_eval = sub.add_parser("evaluate", help="recompute metrics from records")
    p_eval.add_argument("--records", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches the config-error code
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ProviderError as exc:
        print(f"provider failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, SemcomError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
