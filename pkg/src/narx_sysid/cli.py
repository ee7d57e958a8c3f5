"""``narx-sysid`` command line: excite, train, eval, report.

Exit codes: 0 ok, 2 input/config error, 3 simulation instability,
4 training divergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import fileio
from .control import AXES, run_experiment
from .errors import (
    ArgumentError,
    ConfigurationError,
    DesignError,
    ExperimentError,
    ModelError,
    SimulationFault,
    TrainingError,
)
from .evaluate import evaluate
from .metrics import residual_autocorr
from .narx import init_weights
from .train import fit

log = logging.getLogger("narx_sysid")

EXIT_OK, EXIT_INPUT, EXIT_UNSTABLE, EXIT_DIVERGED = 0, 2, 3, 4
BUNDLE_FOR_REPORT = ("predictions.csv", "training_report.csv")
ACF_MAX_LAG = 50


class BundleError(ConfigurationError):
    pass


def _update_manifest(out: Path, **items) -> None:
    path = out / "manifest.txt"
    current = fileio.read_keyvalue(path) if path.exists() else {}
    current["tool_version"] = __version__
    current.update({k: str(v) for k, v in items.items()})
    fileio.write_keyvalue(path, sorted(current.items()))


def _config(args) -> cfgmod.ExperimentFile:
    if args.config is None:
        raise ConfigurationError("--config is required for this command")
    cfg = cfgmod.load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _out_dir(args, cfg=None) -> Path:
    out = Path(args.out) if args.out else Path(cfg["out_dir"] if cfg is not None else ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _excite_one(cfg: cfgmod.ExperimentFile, axis: str, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    data = run_experiment(cfgmod.experiment_config(cfg, axis))
    path = out / "dataset.csv"
    digest = cfg.digest()
    fileio.write_dataset(path, data, digest)
    _update_manifest(out, config_digest=digest, config_path=cfg.path, axis=axis, dataset="dataset.csv")
    return path


def cmd_excite(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    if cfg["axis"] != "all":
        path = _excite_one(cfg, cfg["axis"], out)
        print(f"wrote {path}")
        return EXIT_OK
    jobs = max(1, args.jobs or 1)
    if jobs == 1:
        paths = [_excite_one(cfg, ax, out / ax) for ax in AXES]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            paths = list(pool.map(_excite_one, [cfg] * 3, AXES, [out / ax for ax in AXES]))
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _summary_items(report, sp_metrics, model):
    items = [
        ("best_epoch", report.best_epoch),
        ("best_val_mse", fileio.fmt17(report.best_val_mse)),
        ("n_epochs", len(report.val_mse) - 1),
        ("stop_reason", report.stop_reason),
        ("seed", report.seed),
        ("options_digest", report.options_digest),
        ("n_params", model.n_params),
    ]
    for name, value in sp_metrics.items():
        items.append((f"sp.{name}", value if isinstance(value, int) else fileio.fmt17(value)))
    items.append(("wall_time_s", f"{report.wall_time_s:.3f}"))
    return items


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    dataset_path = Path(args.dataset) if args.dataset else out / "dataset.csv"
    data = fileio.read_dataset(dataset_path)
    model = init_weights(cfgmod.architecture(cfg), cfgmod.delay_config(cfg), seed=cfg["seed"])
    model, report = fit(model, data, cfgmod.training_options(cfg))
    fileio.save_model(out / "model.txt", model, dt=data.dt, axis=data.axis)
    fileio.write_training_report(out / "training_report.csv", report.train_mse, report.val_mse)
    ev = evaluate(model, data, free_run=False)
    fileio.write_keyvalue(out / "training_summary.txt", _summary_items(report, ev.reports["sp"], model))
    _update_manifest(out, config_digest=cfg.digest(), config_path=cfg.path, model="model.txt",
                     training_report="training_report.csv")
    print(f"best epoch {report.best_epoch}  best validation MSE {report.best_val_mse:.6g}  "
          f"({report.stop_reason} after {len(report.val_mse) - 1} epochs)")
    return EXIT_OK


def _check_compatible(header: dict, meta: dict) -> None:
    if "dt" in header and abs(float(header["dt"]) - float(meta["dt"])) > 1e-12:
        raise ConfigurationError(f"model dt {header['dt']} differs from dataset dt {meta['dt']}")
    if "axis" in header and header["axis"] != meta.get("axis"):
        raise ConfigurationError(f"model axis {header['axis']} differs from dataset axis {meta.get('axis')}")


def cmd_eval(args) -> int:
    out = _out_dir(args)
    model_path = Path(args.model) if args.model else out / "model.txt"
    dataset_path = Path(args.dataset) if args.dataset else out / "dataset.csv"
    model, header = fileio.load_model(model_path)
    data = fileio.read_dataset(dataset_path)
    _check_compatible(header, fileio.dataset_meta(dataset_path))
    ev = evaluate(model, data)
    fileio.write_metrics(out / "metrics.txt", ev.reports)
    fileio.write_predictions(out / "predictions.csv", data.y.time, ev.segment, ev.y, ev.y_sp, ev.y_p)
    _update_manifest(out, metrics="metrics.txt", predictions="predictions.csv")
    for mode, rep in ev.reports.items():
        print(f"{mode.upper():>2}: fit est {rep.fit_percent_est:.2f}%  val {rep.fit_percent_val:.2f}%  "
              f"MSE {rep.mse_est:.4g}  FPE {rep.fpe:.4g}  R val {rep.r_val:.6f}")
    return EXIT_OK


def cmd_report(args) -> int:
    from . import plots

    out = Path(args.out) if args.out else Path(".")
    for name in BUNDLE_FOR_REPORT:
        if not (out / name).exists():
            raise BundleError(f"run bundle {out} is missing {name}")
    pred = fileio.read_predictions(out / "predictions.csv")
    curve = fileio.read_training_report(out / "training_report.csv")
    best_epoch = int(np.argmin(curve["val_mse"]))
    plots.plot_overlay(out / "overlay.svg", pred["t_s"], pred["y"], pred["y_sp"], pred["y_p"], pred["segment"])
    plots.plot_training_curve(out / "training_curve.svg", curve["epoch"], curve["train_mse"],
                              curve["val_mse"], best_epoch)
    r = plots.plot_scatter(out / "scatter.svg", pred["y"], pred["y_sp"], pred["segment"])
    val = pred["segment"] == "val"
    acf = residual_autocorr(pred["y"][val] - pred["y_sp"][val], ACF_MAX_LAG)
    plots.plot_residual_acf(out / "residual_acf.svg", acf)
    fileio.write_lines(out / "residual_acf.csv", ["lag,acf,band"] + [
        f"{k},{fileio.fmt9(v)},{fileio.fmt9(acf.band)}" for k, v in zip(acf.lags, acf.values)
    ])
    print(f"R est {r['est']:.6f}  R val {r['val']:.6f}  "
          f"residual lags inside band: {int(acf.inside[1:].sum())}/{ACF_MAX_LAG}")
    return EXIT_OK


COMMANDS = {"excite": cmd_excite, "train": cmd_train, "eval": cmd_eval, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="narx-sysid", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="experiment file (key = value lines)")
    parser.add_argument("--dataset", help="dataset CSV (default: OUT/dataset.csv)")
    parser.add_argument("--model", help="model file (default: OUT/model.txt)")
    parser.add_argument("--out", help="run bundle directory (default: config out_dir)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--jobs", type=int, default=1, help="parallel axis experiments when axis = all")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ExperimentError, SimulationFault) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigurationError, ArgumentError, ModelError, DesignError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
