"""Command-line pipeline: ingest -> train -> discover / progression -> serve.

Every command writes its artifacts plus a manifest recording seeds,
versions and input digests; rerunning with identical inputs and seeds
reproduces every output byte for byte.  Exit codes: 0 success, 1
environment/config problem, 2 data validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, CHECKPOINT_FORMAT_VERSION
from .cvae import CvaeHyper, CvaeParams, train as train_cvae
from .dataset import (
    BUCKETS,
    CONSTITUENTS,
    IMPACT_NAMES,
    AgeBucket,
    DataError,
    Dataset,
    FactorTable,
    parse_uci_csv,
)
from .discovery import (
    DEFAULT_ARCHETYPES,
    DEFAULT_BAND_CENTERS,
    DEFAULT_CANDIDATES_PER_BUCKET,
    DEFAULT_PROGRESSION_SAMPLES,
    StrengthBand,
    archetypal_analysis,
    extant_baseline,
    filter_dominating,
    generate_candidates,
    hull_export,
    nearest_to_archetypes,
    progression_experiment,
    reduction_row,
    ReductionReport,
    sample_condition_array,
    strength_spectrum_export,
)
from .neuralnet import TrainingError
from .predictors import (
    ImpactPredictor,
    StrengthPredictorSet,
    TrainConfig,
    evaluate_impact_predictor,
    evaluate_strength_predictors,
    train_impact_predictor,
    train_strength_predictors,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; these are config errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, doc: dict, compact: bool = False) -> None:
    if compact:
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    else:
        text = json.dumps(doc, sort_keys=True, indent=2)
    path.write_text(text + "\n", encoding="utf-8")


def _write_manifest(out_dir: Path, command: str, seeds: dict, parameters: dict,
                    inputs: dict[str, Path], outputs: list[Path]) -> None:
    doc = {
        "schema": "greencrete.manifest/1",
        "command": command,
        "package_version": __version__,
        "checkpoint_format_version": CHECKPOINT_FORMAT_VERSION,
        "seeds": seeds,
        "parameters": parameters,
        "inputs": {name: _sha256(path) for name, path in sorted(inputs.items())},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    # named per command so discover and progression can share an output dir
    _write_json(out_dir / f"manifest_{command}.json", doc)


def _load_models(models_dir: Path):
    cvae = CvaeParams.load(models_dir / "cvae.json")
    impacts = ImpactPredictor.load(models_dir / "impact_predictor.json")
    strengths = StrengthPredictorSet.load_dir(models_dir)
    dataset = Dataset.load(models_dir / "dataset.json")
    return cvae, impacts, strengths, dataset


def _model_input_digests(models_dir: Path) -> dict[str, Path]:
    names = ["cvae.json", "impact_predictor.json", "dataset.json"]
    names += [f"strength_{b.name}.json" for b in BUCKETS]
    return {name: models_dir / name for name in names}


# --- commands ---------------------------------------------------------------

def cmd_ingest(args) -> int:
    uci = Path(args.uci)
    factors_path = Path(args.factors)
    for path in (uci, factors_path):
        if not path.exists():
            print(f"error: no such file: {path}", file=sys.stderr)
            return EXIT_CONFIG
    factors = FactorTable.load(factors_path)
    records = parse_uci_csv(uci.read_bytes())
    if not records:
        raise DataError("no data rows in input CSV")
    dataset = Dataset.build(records, factors, test_fraction=args.test_fraction,
                            seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path = out / "dataset.json"
    dataset_path.write_text(dataset.to_json(), encoding="utf-8")
    labeled_path = out / "labeled.csv"
    labeled_path.write_text(dataset.export_labeled_csv(), encoding="utf-8")
    _write_manifest(
        out, "ingest",
        seeds={"split": args.seed},
        parameters={"test_fraction": args.test_fraction},
        inputs={"uci": uci, "factors": factors_path},
        outputs=[dataset_path, labeled_path],
    )
    print(f"ingested {len(records)} rows "
          f"({len(dataset.train_ids)} train / {len(dataset.test_ids)} test)")
    return EXIT_OK


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    dataset_path = data_dir / "dataset.json"
    if not dataset_path.exists():
        print(f"error: no dataset at {dataset_path}", file=sys.stderr)
        return EXIT_CONFIG
    dataset = Dataset.load(dataset_path)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    hyper = CvaeHyper(epochs=args.epochs, seed=args.seed, kl_weight=args.kl_weight)
    result = train_cvae(dataset, hyper)
    print(f"cvae: epoch-0 loss {result.epoch_losses[0]:.5f} -> "
          f"final {result.epoch_losses[-1]:.5f}" if result.epoch_losses
          else "cvae: 0 epochs (untrained)")

    impact_cfg = TrainConfig(epochs=args.epochs, seed=args.seed + 100)
    impacts = train_impact_predictor(dataset, impact_cfg)
    strength_cfg = TrainConfig(epochs=args.epochs, seed=args.seed + 200)
    strengths = train_strength_predictors(dataset, strength_cfg)

    outputs = []
    cvae_path = out / "cvae.json"
    result.params.save(cvae_path)
    outputs.append(cvae_path)
    impact_path = out / "impact_predictor.json"
    impacts.save(impact_path)
    outputs.append(impact_path)
    outputs.extend(strengths.save_dir(out))

    dataset_copy = out / "dataset.json"
    dataset_copy.write_text(dataset.to_json(), encoding="utf-8")
    outputs.append(dataset_copy)

    trace_path = out / "loss_trace.json"
    _write_json(trace_path, {
        "schema": "greencrete.loss_trace/1",
        "epoch_losses": result.epoch_losses,
        "epoch_recon_mse": result.epoch_recon_mse,
    })
    outputs.append(trace_path)

    impact_metrics = evaluate_impact_predictor(impacts, dataset)
    strength_metrics = evaluate_strength_predictors(strengths, dataset)
    outputs.extend(_write_metrics(out, impact_metrics, strength_metrics))

    _write_manifest(
        out, "train",
        seeds={"cvae": args.seed, "impacts": args.seed + 100, "strengths": args.seed + 200},
        parameters={"epochs": args.epochs, "kl_weight": args.kl_weight},
        inputs={"dataset.json": dataset_path},
        outputs=outputs,
    )
    for name, m in impact_metrics.items():
        print(f"impact {name}: r2={_fmt(m.r2)} mae={m.mae:.4f} rmse={m.rmse:.4f}")
    for bucket, m in strength_metrics.items():
        print(f"strength {bucket.name}: r2={_fmt(m.r2)} mae={m.mae:.3f} MPa")
    return EXIT_OK


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def _write_metrics(out: Path, impact_metrics, strength_metrics) -> list[Path]:
    paths = []
    impact_doc = {name: m.to_dict() for name, m in impact_metrics.items()}
    strength_doc = {b.name: m.to_dict() for b, m in strength_metrics.items()}
    p = out / "impact_metrics.json"
    _write_json(p, {"schema": "greencrete.metrics/1", "metrics": impact_doc})
    paths.append(p)
    p = out / "strength_metrics.json"
    _write_json(p, {"schema": "greencrete.metrics/1", "metrics": strength_doc})
    paths.append(p)

    def table(columns: list[str], rows_by_metric: dict[str, list]) -> str:
        lines = ["metric," + ",".join(columns)]
        for metric, values in rows_by_metric.items():
            lines.append(metric + "," + ",".join(
                "" if v is None else f"{v:.6f}" for v in values))
        return "\n".join(lines) + "\n"

    p = out / "impact_metrics.csv"
    p.write_text(table(list(IMPACT_NAMES), {
        "mae": [impact_metrics[n].mae for n in IMPACT_NAMES],
        "rmse": [impact_metrics[n].rmse for n in IMPACT_NAMES],
        "nrmse": [impact_metrics[n].nrmse for n in IMPACT_NAMES],
        "r2": [impact_metrics[n].r2 for n in IMPACT_NAMES],
    }), encoding="utf-8")
    paths.append(p)
    buckets = [b for b in BUCKETS if b in strength_metrics]
    p = out / "strength_metrics.csv"
    p.write_text(table([b.name for b in buckets], {
        "mae": [strength_metrics[b].mae for b in buckets],
        "rmse": [strength_metrics[b].rmse for b in buckets],
        "nrmse": [strength_metrics[b].nrmse for b in buckets],
        "r2": [strength_metrics[b].r2 for b in buckets],
    }), encoding="utf-8")
    paths.append(p)
    return paths


def _parse_bands(spec: str | None) -> dict[AgeBucket, tuple[float, ...]]:
    """'D7:30,40;D28:70' -> centers per bucket; unlisted buckets keep defaults."""
    if not spec:
        return dict(DEFAULT_BAND_CENTERS)
    centers = dict(DEFAULT_BAND_CENTERS)
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        name, _, values = part.partition(":")
        try:
            bucket = AgeBucket[name.strip()]
        except KeyError:
            raise DataError(f"unknown bucket in --bands: {name!r}") from None
        try:
            centers[bucket] = tuple(float(v) for v in values.split(",") if v.strip())
        except ValueError:
            raise DataError(f"bad band centers for {name}: {values!r}") from None
    return centers


def cmd_discover(args) -> int:
    models_dir = Path(args.models)
    cvae, impacts, strengths, dataset = _load_models(models_dir)
    bands = _parse_bands(args.bands)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []

    report = ReductionReport()
    for idx, bucket in enumerate(BUCKETS):
        conditions = sample_condition_array(
            args.n, bucket, cvae.normalization, seed=args.seed + 10 * idx
        )
        candidates = generate_candidates(
            cvae, impacts, strengths, conditions, bucket,
            seed=args.seed + 10 * idx + 5, jobs=args.jobs,
        )
        spectrum_path = out / f"spectrum_{bucket.name}.json"
        _write_json(spectrum_path, strength_spectrum_export(candidates), compact=True)
        outputs.append(spectrum_path)

        for center in bands.get(bucket, ()):
            band = StrengthBand(center, args.half_width)
            baseline = extant_baseline(dataset, bucket, band)
            if baseline.empty:
                print(f"{bucket.name} {band.label()}: no extant records, skipped")
                continue
            winners = filter_dominating(candidates, baseline, band)
            report.rows.append(reduction_row(winners, baseline, band))
            print(f"{bucket.name} {band.label()}: {len(winners)} dominating "
                  f"of {len(candidates)} generated")
            k = min(args.archetypes, len(winners))
            if k >= 1:
                impacts01 = cvae.normalization.normalize_array(winners.impacts, IMPACT_NAMES)
                hull = archetypal_analysis(impacts01, k=k, seed=args.seed + 1000 + idx)
                nearest = nearest_to_archetypes(winners, hull.archetypes, cvae.normalization)
                hull_path = out / f"hull_{bucket.name}_{center:g}.json"
                _write_json(hull_path,
                            hull_export(bucket, band, hull, nearest, cvae.normalization))
                outputs.append(hull_path)

    reduction_csv = out / "reduction.csv"
    reduction_csv.write_text(report.to_csv(), encoding="utf-8")
    outputs.append(reduction_csv)
    reduction_json = out / "reduction.json"
    _write_json(reduction_json, report.to_doc())
    outputs.append(reduction_json)
    outputs.append(_write_extremal_csv(out, outputs))

    _write_manifest(
        out, "discover",
        seeds={"base": args.seed},
        parameters={"n": args.n, "half_width": args.half_width,
                    "archetypes": args.archetypes,
                    "bands": {b.name: list(c) for b, c in bands.items()}},
        inputs=_model_input_digests(models_dir),
        outputs=outputs,
    )
    return EXIT_OK


def _write_extremal_csv(out: Path, outputs: list[Path]) -> Path:
    """Flatten every hull's nearest formulas into one table."""
    lines = ["bucket,strength_band,archetype," + ",".join(CONSTITUENTS)
             + ",predicted_strength_mpa,gwp,ap,cbw"]
    for path in outputs:
        if not path.name.startswith("hull_"):
            continue
        doc = json.loads(path.read_text(encoding="utf-8"))
        band = f"{doc['band_center_mpa']:g}±{doc['band_half_width_mpa']:g}"
        for a_idx, entry in enumerate(doc["nearest_formulas"]):
            f = entry["formula"]
            lines.append(",".join(
                [doc["bucket"], band, str(a_idx)]
                + [f"{f[c]:.1f}" for c in CONSTITUENTS]
                + [f"{entry['predicted_strength_mpa']:.2f}"]
                + [f"{entry['predicted_impacts'][k]:.4f}" for k in IMPACT_NAMES]
            ))
    path = out / "extremal_formulas.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def cmd_progression(args) -> int:
    models_dir = Path(args.models)
    cvae, _, strengths, dataset = _load_models(models_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    summary = ["bucket,strength_min_mpa,strength_max_mpa,rmse_mpa"]
    for idx, bucket in enumerate(BUCKETS):
        report = progression_experiment(
            cvae, strengths, dataset, bucket, n=args.n,
            seed=args.seed + idx, grid=args.grid,
        )
        path = out / f"progression_{bucket.name}.json"
        _write_json(path, report.to_doc(), compact=True)
        outputs.append(path)
        summary.append(f"{bucket.name},{report.strength_min_mpa:g},"
                       f"{report.strength_max_mpa:g},{report.rmse_mpa:.6f}")
        print(f"{bucket.name}: rmse {report.rmse_mpa:.3f} MPa over "
              f"[{report.strength_min_mpa:g}, {report.strength_max_mpa:g}]")
    summary_path = out / "progression_summary.csv"
    summary_path.write_text("\n".join(summary) + "\n", encoding="utf-8")
    outputs.append(summary_path)
    _write_manifest(
        out, "progression",
        seeds={"base": args.seed},
        parameters={"n": args.n, "grid": args.grid},
        inputs=_model_input_digests(models_dir),
        outputs=outputs,
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import ModelRegistry, create_app

    models_dir = Path(args.models)
    try:
        registry = ModelRegistry.load(models_dir)
    except Exception as exc:
        print(f"error: cannot load models from {models_dir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    artifacts = Path(args.artifacts) if args.artifacts else models_dir
    app = create_app(
        registry=registry,
        artifacts_dir=artifacts,
        models_dir=models_dir,
        generate_cap=args.cap,
        on_demand_spectrum=args.on_demand,
    )
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="greencrete",
                     description="Generative design of low-impact concrete mixes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="label, normalize and split the source CSV")
    p.add_argument("--uci", required=True, help="source CSV (9 columns, header row)")
    p.add_argument("--factors", required=True, help="impact factor table JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42, help="split seed (default 42)")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train the generator and property predictors")
    p.add_argument("--data", required=True, help="directory with dataset.json")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--kl-weight", type=float, default=1.0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("discover", help="mass-generate candidates and screen them")
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=DEFAULT_CANDIDATES_PER_BUCKET,
                   help="candidates per age bucket")
    p.add_argument("--bands", default=None,
                   help="band centers per bucket, e.g. 'D7:30,40;D28:70'")
    p.add_argument("--half-width", type=float, default=1.0)
    p.add_argument("--archetypes", type=int, default=DEFAULT_ARCHETYPES)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("progression", help="strength-conditioned generation sweep")
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=DEFAULT_PROGRESSION_SAMPLES)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--grid", action="store_true",
                   help="deterministic inclusive grid over [0, 1] instead of sampling")
    p.set_defaults(func=cmd_progression)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--models", required=True)
    p.add_argument("--artifacts", default=None,
                   help="directory with discover/progression outputs (default: models dir)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--cap", type=int, default=10_000)
    p.add_argument("--on-demand", type=int, default=0,
                   help="enable on-demand spectra of this many candidates")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
