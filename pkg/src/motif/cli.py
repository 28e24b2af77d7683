"""Command-line front end: ``motif <command> [options]``.

Every option can also come from a UTF-8 ``key=value`` file passed with
``--config``; flags given on the command line win.  Each run writes the
fully resolved configuration next to its outputs.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import inverse, metrics, oracle, plotting, rfnet, surrogate, transfer
from .cmaes import CmaesConfig
from .geometry import GeometryError, ParamSpace, XfmrTemplate
from .surrogate import MlpSpec, TrainConfig

log = logging.getLogger("motif")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_NO_DESIGN = 4
DEFAULT_WORKERS = 4
CONFIG_SNAPSHOT = "resolved_config.txt"


class CliError(Exception):
    """Bad usage or configuration (exit status 2)."""


@dataclass(frozen=True)
class Opt:
    name: str  # dashed flag name, also the config key
    kind: str  # int | float | str | bool | path
    default: object = None
    help: str = ""
    required: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


def _interval(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise CliError(f"interval {text!r} must look like 'lo,hi'")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise CliError(f"interval {text!r} must look like 'lo,hi'") from None


def _int_list(text: str, what: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise CliError(f"{what} must be a comma-separated list of integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise CliError(f"{what} needs positive integers, got {text!r}")
    return vals


def _pair(text: str) -> tuple[int, int]:
    try:
        m, n = (int(v) for v in text.split(":"))
    except ValueError:
        raise CliError(f"turn pair {text!r} must look like 'M:N', e.g. '1:2'") from None
    return m, n


SEED = Opt("seed", "int", 0, "global random seed")
SPLIT_SEED = Opt("split-seed", "int", 0, "seed of the 80/10/10 train/val/test split")

COMMANDS: dict[str, list[Opt]] = {
    "dataset gen": [
        Opt("template", "str", "mn", "one_to_one | m_to_n | parallel_inductor | eight_shaped"),
        Opt("samples", "int", 1000, "number of accepted samples"),
        SEED,
        Opt("grid", "str", "auto", "half (0.5..100 GHz), one (1..200 GHz) or auto"),
        Opt("pairs", "str", "", "allowed turn pairs, e.g. '1:2,2:3' (default: template's set)"),
        Opt("outer-dim", "str", "", "outer dimension interval 'lo,hi' in um"),
        Opt("trace-width", "str", "", "trace width interval 'lo,hi' in um"),
        Opt("trace-spacing", "str", "", "trace spacing interval 'lo,hi' in um"),
        Opt("winding-gap", "str", "", "winding gap interval 'lo,hi' in um"),
        Opt("out", "path", None, "output dataset file", required=True),
    ],
    "train": [
        Opt("dataset", "path", None, "dataset file", required=True),
        Opt("out", "path", None, "output model directory", required=True),
        SEED,
        SPLIT_SEED,
        Opt("hidden", "str", "256,256,256", "hidden layer widths"),
        Opt("budget", "int", 0, "if > 0, size equal-width hidden layers to this parameter count"),
        Opt("activation", "str", "relu", "relu | tanh"),
        Opt("epochs", "int", 200, "maximum epochs"),
        Opt("patience", "int", 20, "early-stopping patience"),
        Opt("lr", "float", 1e-3, "Adam learning rate"),
        Opt("batch", "int", 64, "mini-batch size"),
    ],
    "transfer": [
        Opt("dataset", "path", None, "dataset file", required=True),
        Opt("out", "path", None, "output ensemble directory", required=True),
        SEED,
        SPLIT_SEED,
        Opt("nband", "int", 10, "number of frequency sub-bands"),
        Opt("titer", "int", 3, "number of forward/backward iterations"),
        Opt("hidden", "str", "64,64,64", "hidden layer widths of every sub-band model"),
        Opt("activation", "str", "relu", "relu | tanh"),
        Opt("visit-epochs", "int", 30, "epoch budget per visit"),
        Opt("bootstrap-epochs", "int", 0, "epoch budget of the first band-1 visit (0: same as visits)"),
        Opt("patience", "int", 10, "early-stopping patience per visit"),
        Opt("lr", "float", 1e-3, "Adam learning rate"),
        Opt("batch", "int", 64, "mini-batch size"),
    ],
    "eval": [
        Opt("dataset", "path", None, "dataset file", required=True),
        Opt("model", "path", None, "model or ensemble directory", required=True),
        Opt("baseline", "path", "", "optional second model for a comparison table"),
        Opt("out", "path", None, "output directory", required=True),
        Opt("split", "str", "test", "test | val | all"),
        Opt("perfect", "bool", False, "harness mode: use the labels as predictions"),
    ],
    "invdesign": [
        Opt("model", "path", None, "trained ensemble directory", required=True),
        Opt("out", "path", None, "output directory", required=True),
        Opt("z01", "str", "50,0", "source impedance 're,im' in ohms"),
        Opt("z02", "str", "50,0", "load impedance 're,im' in ohms"),
        Opt("fc", "float", None, "center frequency in GHz", required=True),
        Opt("bw", "float", None, "bandwidth in GHz", required=True),
        Opt("rho", "int", 1, "window index"),
        Opt("w-area", "float", 1.0, "area weight per mm^2"),
        Opt("w-gamma", "float", 1.0, "|Gamma_in| weight"),
        Opt("w-loss", "float", 1.0, "(1 - |L|) weight"),
        Opt("turns", "str", "", "turn pair 'M:N' (default: first trained pair)"),
        Opt("c-max", "float", inverse.C_MAX_FF, "capacitor upper bound in fF"),
        Opt("max-evals", "int", 3000, "CMA-ES evaluation budget"),
        Opt("popsize", "int", 0, "CMA-ES population (0: default)"),
        Opt("sigma0", "float", 0.3, "initial step as a fraction of the box"),
        Opt("max-seconds", "float", 180.0, "wall-time cap for the search"),
        SEED,
    ],
    "export touchstone": [
        Opt("dataset", "path", None, "dataset file", required=True),
        Opt("index", "int", 0, "sample index"),
        Opt("model", "path", "", "if given, export this model's prediction instead of the label"),
        Opt("out", "path", None, "output .s4p file", required=True),
    ],
}


# --- config resolution ------------------------------------------------------------


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise CliError(f"config file not found: {path}")
    out = {}
    for no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError(f"{path}:{no}: expected key=value, got {line!r}")
        out[key.strip().replace("_", "-")] = value.strip()
    return out


def _convert(opt: Opt, value):
    if value is None or not isinstance(value, str):
        return value
    try:
        if opt.kind == "int":
            return int(value)
        if opt.kind == "float":
            return float(value)
    except ValueError:
        raise CliError(f"option {opt.name}: {value!r} is not a valid {opt.kind}") from None
    if opt.kind == "bool":
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise CliError(f"option {opt.name}: {value!r} is not a boolean")
    return value


def resolve(command: str, args: argparse.Namespace) -> dict:
    opts = {o.name: o for o in COMMANDS[command]}
    cfg = {name: o.default for name, o in opts.items()}
    if getattr(args, "config", None):
        from_file = read_config_file(args.config)
        unknown = sorted(set(from_file) - set(opts))
        if unknown:
            raise CliError(f"unknown config keys for '{command}': {', '.join(unknown)}")
        cfg.update({k: _convert(opts[k], v) for k, v in from_file.items()})
    for name, o in opts.items():
        value = getattr(args, o.dest, None)
        if value is not None:
            cfg[name] = _convert(o, value)
    missing = [name for name, o in opts.items() if o.required and cfg[name] in (None, "")]
    if missing:
        raise CliError(f"'{command}' needs: {', '.join('--' + m for m in missing)}")
    return cfg


def config_text(command: str, cfg: dict, workers: int) -> str:
    lines = [f"# motif {command}", f"workers={workers}"]
    lines += [f"{k}={'' if v is None else v}" for k, v in sorted(cfg.items())]
    return "\n".join(lines) + "\n"


def _workers(args) -> int:
    if args.workers is not None:
        n = args.workers
    else:
        env = os.environ.get("MOTIF_WORKERS")
        try:
            n = int(env) if env else DEFAULT_WORKERS
        except ValueError:
            raise CliError(f"MOTIF_WORKERS must be an integer, got {env!r}") from None
    if n < 1:
        raise CliError(f"worker count must be >= 1, got {n}")
    return n


# --- shared helpers ------------------------------------------------------------------


def row_hashes(features: np.ndarray, labels: np.ndarray) -> list[str]:
    f = np.ascontiguousarray(features, dtype="<f4")
    y = np.ascontiguousarray(labels, dtype="<f4")
    return [hashlib.sha256(f[i].tobytes() + y[i].tobytes()).hexdigest()[:20] for i in range(len(f))]


def _load_dataset(path) -> oracle.Dataset:
    path = Path(path)
    if not path.exists():
        raise CliError(f"dataset not found: {path} (create one with 'motif dataset gen')")
    return oracle.read_dataset(path)


def _load_model(path) -> tuple[transfer.BandEnsemble, dict]:
    path = Path(path)
    if not (path / transfer.ENSEMBLE_MANIFEST).exists():
        raise CliError(f"no trained model at {path} (expected {transfer.ENSEMBLE_MANIFEST}; run 'motif train' or 'motif transfer')")
    return transfer.load_ensemble(path)


def _splits(ds: oracle.Dataset, split_seed: int):
    i, j, k = ds.split(split_seed)
    if min(len(i), len(j), len(k)) == 0:
        raise CliError(f"dataset of {len(ds)} samples is too small for an 80/10/10 split")
    return ds.subset(i), ds.subset(j), ds.subset(k)


def _model_extra(ds: oracle.Dataset, train: oracle.Dataset, cfg: dict, kind: str) -> dict:
    return {
        "kind": kind,
        "template": ds.template.value,
        "space": ds.space.to_text() if ds.space else "",
        "split_seed": cfg["split-seed"],
        "train_rows": row_hashes(train.features, train.labels),
        "config": {k: v for k, v in sorted(cfg.items())},
    }


def _write_snapshot(path: Path, command: str, cfg: dict, workers: int) -> None:
    path.write_text(config_text(command, cfg, workers), encoding="utf-8")


# --- commands ----------------------------------------------------------------------


def cmd_dataset_gen(cfg: dict, workers: int) -> int:
    if cfg["samples"] < 1:
        raise CliError(f"--samples must be >= 1, got {cfg['samples']}")
    try:
        template = XfmrTemplate.parse(cfg["template"])
    except (GeometryError, ValueError) as exc:
        raise CliError(str(exc)) from None
    grid_name = cfg["grid"]
    if grid_name == "auto":
        grid_name = "one" if template is XfmrTemplate.ONE_TO_ONE else "half"
    grids = {"half": rfnet.FrequencyGrid.half_ghz, "one": rfnet.FrequencyGrid.one_ghz}
    if grid_name not in grids:
        raise CliError(f"--grid must be half, one or auto, got {cfg['grid']!r}")
    overrides = {}
    for name in ("outer-dim", "trace-width", "trace-spacing", "winding-gap"):
        if cfg[name]:
            overrides[name.replace("-", "_")] = _interval(cfg[name])
    space = ParamSpace.default(template, **overrides)
    if cfg["pairs"]:
        space = space.with_pairs(*(_pair(p) for p in cfg["pairs"].split(",")))
    space.validate(template)

    out = Path(cfg["out"])
    if not out.parent.exists() or not os.access(out.parent, os.W_OK):
        raise CliError(f"cannot write to {out.parent}")
    start = time.monotonic()
    ds = oracle.generate_dataset(space, template, cfg["samples"], grids[grid_name](), cfg["seed"], workers)
    oracle.write_dataset(ds, out)
    _write_snapshot(out.with_name(out.name + ".config"), "dataset gen", cfg, workers)
    print(f"samples={len(ds)}")
    print(f"rejection_rate={ds.rejected / ds.attempts:.4f}")
    print(f"wall_time_s={time.monotonic() - start:.2f}")
    print(f"sha256={oracle.file_sha256(out)}")
    return EXIT_OK


def _train_cfg(cfg: dict, epochs: int) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg["lr"], batch_size=cfg["batch"], epochs=epochs, patience=cfg["patience"], seed=cfg["seed"]
    )


def cmd_train(cfg: dict, workers: int) -> int:
    ds = _load_dataset(cfg["dataset"])
    tr, va, _ = _splits(ds, cfg["split-seed"])
    if cfg["budget"] > 0:
        width = surrogate.width_for_budget(cfg["budget"], tr.features.shape[1], tr.labels.shape[1], 3)
        hidden = (width,) * 3
    else:
        hidden = _int_list(cfg["hidden"], "--hidden")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    e, res = transfer.train_monolithic(
        (tr.features, tr.labels), (va.features, va.labels), ds.grid,
        _train_cfg(cfg, cfg["epochs"]), cfg["seed"], hidden, cfg["activation"],
    )
    transfer.save_ensemble(e, out, ds.content_hash(), _model_extra(ds, tr, cfg, "monolithic"))
    with open(out / "history.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for i, (a, b) in enumerate(zip(res.train_loss, res.val_loss), 1):
            w.writerow([i, f"{a:.8g}", f"{b:.8g}"])
    _write_snapshot(out / CONFIG_SNAPSHOT, "train", cfg, workers)
    print(f"params={e.n_params}")
    print(f"hidden={','.join(map(str, hidden))}")
    print(f"best_epoch={res.best_epoch}")
    print(f"best_val_loss={res.best_val:.6g}")
    print(f"wall_time_s={time.monotonic() - start:.2f}")
    return EXIT_OK


def cmd_transfer(cfg: dict, workers: int) -> int:
    ds = _load_dataset(cfg["dataset"])
    tr, va, _ = _splits(ds, cfg["split-seed"])
    hidden = _int_list(cfg["hidden"], "--hidden")
    visit = _train_cfg(cfg, cfg["visit-epochs"])
    boot = _train_cfg(cfg, cfg["bootstrap-epochs"]) if cfg["bootstrap-epochs"] > 0 else None
    schedule = transfer.TransferSchedule(cfg["nband"], cfg["titer"], visit, boot)
    transfer.partition(ds.grid, schedule.n_band)  # fail fast before training
    if schedule.n_band == 1:
        print("nband=1: a single full-band model is trained (equivalent to 'motif train')")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    e = transfer.run_self_transfer(
        (tr.features, tr.labels), (va.features, va.labels), ds.grid, schedule, cfg["seed"], hidden, cfg["activation"],
        on_visit=lambda v: log.info("visit t=%d %s band=%d val=%.6g", v.iteration, v.direction, v.band, v.val_loss),
    )
    transfer.save_ensemble(e, out, ds.content_hash(), _model_extra(ds, tr, cfg, "transfer"))
    with open(out / "history.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["visit", "iteration", "direction", "band", "source", "epochs", "val_loss"])
        for i, v in enumerate(e.provenance, 1):
            w.writerow([i, v.iteration, v.direction, v.band, v.source or "", v.epochs, f"{v.val_loss:.8g}"])
    _write_snapshot(out / CONFIG_SNAPSHOT, "transfer", cfg, workers)
    print(f"bands={schedule.n_band}")
    print(f"visits={len(e.provenance)}")
    print(f"params={e.n_params}")
    print(f"wall_time_s={time.monotonic() - start:.2f}")
    return EXIT_OK


def _eval_split(ds: oracle.Dataset, manifest: dict, which: str) -> oracle.Dataset:
    if which == "all":
        return ds
    if which not in ("test", "val"):
        raise CliError(f"--split must be test, val or all, got {which!r}")
    _, va, te = _splits(ds, int(manifest.get("split_seed", 0)))
    return te if which == "test" else va


def check_leakage(manifest: dict, eval_set: oracle.Dataset) -> None:
    seen = set(manifest.get("train_rows", []))
    hits = [i for i, h in enumerate(row_hashes(eval_set.features, eval_set.labels)) if h in seen]
    if hits:
        raise surrogate.LeakageError(
            f"{len(hits)} evaluation samples were used for training (first evaluation index {hits[0]})"
        )


def _evaluate_model(path, ds, which, perfect) -> tuple[metrics.EvalReport, oracle.Dataset]:
    e, manifest = _load_model(path)
    if e.grid != ds.grid:
        raise CliError(f"model grid ({e.grid.describe()}) does not match dataset grid ({ds.grid.describe()})")
    part = _eval_split(ds, manifest, which)
    check_leakage(manifest, part)
    preds = part.labels if perfect else e.predict(part.features)
    return metrics.evaluate(preds, part.labels, ds.grid), part


def comparison_table(model: metrics.EvalReport, base: metrics.EvalReport) -> str:
    buf = io.StringIO()
    buf.write(f"{'metric':<14}{'model':>12}{'baseline':>12}{'improvement':>14}\n")
    for name in ("mae_avg_full", "mae_avg_2srf"):
        a, b = getattr(model, name), getattr(base, name)
        imp = (b - a) / b if b else 0.0
        buf.write(f"{name:<14}{a:>12.6f}{b:>12.6f}{imp:>13.1%}\n")
    buf.write(f"{'r2':<14}{model.r2:>12.6f}{base.r2:>12.6f}{'':>14}\n")
    return buf.getvalue()


def cmd_eval(cfg: dict, workers: int) -> int:
    ds = _load_dataset(cfg["dataset"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    rep, _ = _evaluate_model(cfg["model"], ds, cfg["split"], cfg["perfect"])
    (out / "summary.txt").write_text(rep.summary(), encoding="utf-8")
    (out / "mae_curve.csv").write_text(rep.curve_csv(), encoding="utf-8")
    series = {"model": rep.mae_curve}
    print(rep.summary(), end="")
    if cfg["baseline"]:
        base, _ = _evaluate_model(cfg["baseline"], ds, cfg["split"], cfg["perfect"])
        (out / "baseline_summary.txt").write_text(base.summary(), encoding="utf-8")
        table = comparison_table(rep, base)
        (out / "comparison.txt").write_text(table, encoding="utf-8")
        series["baseline"] = base.mae_curve
        print(table, end="")
    plotting.line_plot(out / "mae_curve.svg", ds.grid.freqs_ghz, series, "Frequency (GHz)", "MAE")
    _write_snapshot(out / CONFIG_SNAPSHOT, "eval", cfg, workers)
    return EXIT_OK


def cmd_invdesign(cfg: dict, workers: int) -> int:
    e, manifest = _load_model(cfg["model"])
    if not manifest.get("space"):
        raise CliError(f"{cfg['model']} records no parameter space; retrain it with this version")
    template = XfmrTemplate.parse(manifest["template"])
    space = ParamSpace.from_text(manifest["space"])
    turns = _pair(cfg["turns"]) if cfg["turns"] else space.turn_pairs[0]
    if turns not in space.turn_pairs:
        trained = ", ".join(f"{m}:{n}" for m, n in space.turn_pairs)
        raise CliError(f"model was trained for {template.value} turn pairs {trained}, not {turns[0]}:{turns[1]}")
    try:
        z01, z02 = rfnet.parse_complex_pair(cfg["z01"]), rfnet.parse_complex_pair(cfg["z02"])
    except rfnet.RfNetError as exc:
        raise CliError(str(exc)) from None
    target = inverse.MatchTarget(z01, z02, cfg["fc"], cfg["bw"], cfg["rho"])
    weights = inverse.CostWeights(cfg["w-area"], cfg["w-gamma"], cfg["w-loss"])
    cmaes_cfg = CmaesConfig(
        (0.0,), (1.0,), popsize=cfg["popsize"] or None, sigma0=cfg["sigma0"],
        max_evals=cfg["max-evals"], seed=cfg["seed"], max_seconds=cfg["max-seconds"],
    )
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    report = inverse.inverse_design(
        target, weights, template, turns, e, cmaes_cfg, space=space, c_max_ff=cfg["c-max"], workers=workers
    )
    inverse.write_report_bundle(report, out)
    _write_snapshot(out / CONFIG_SNAPSHOT, "invdesign", cfg, workers)
    print(report.text(), end="")
    print(f"wall_time_s={report.wall_time_s:.2f}")
    return EXIT_OK if report.success else EXIT_NO_DESIGN


def cmd_export_touchstone(cfg: dict, workers: int) -> int:
    ds = _load_dataset(cfg["dataset"])
    if not 0 <= cfg["index"] < len(ds):
        raise CliError(f"--index must lie in 0..{len(ds) - 1}, got {cfg['index']}")
    if cfg["model"]:
        e, _ = _load_model(cfg["model"])
        t = transfer.predict_full(e, ds.features[cfg["index"]])
    else:
        t = ds.tensor(cfg["index"])
    rfnet.touchstone_write(t, cfg["out"])
    print(f"wrote {cfg['out']}")
    return EXIT_OK


HANDLERS = {
    "dataset gen": cmd_dataset_gen,
    "train": cmd_train,
    "transfer": cmd_transfer,
    "eval": cmd_eval,
    "invdesign": cmd_invdesign,
    "export touchstone": cmd_export_touchstone,
}


# --- argument parsing -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _add_opts(p: argparse.ArgumentParser, opts: list[Opt]) -> None:
    p.add_argument("--config", help="key=value file; flags override its entries")
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker count (also accepted before the command)")
    for o in opts:
        flag = "--" + o.name
        if o.kind == "bool":
            p.add_argument(flag, dest=o.dest, action="store_const", const="true", default=None, help=o.help)
        else:
            default = "" if o.default is None else f" (default: {o.default})"
            p.add_argument(flag, dest=o.dest, default=None, metavar=o.kind.upper(), help=o.help + default)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="motif", description="Transformer S-parameter surrogates and inverse design.")
    p.add_argument("--workers", type=int, default=None, help=f"worker count (env MOTIF_WORKERS, default {DEFAULT_WORKERS})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, opts in COMMANDS.items():
        head, _, tail = name.partition(" ")
        if tail:
            group = sub.choices.get(head) or sub.add_parser(head, help=f"{head} commands")
            if not any(isinstance(a, argparse._SubParsersAction) for a in group._actions):
                group.add_subparsers(dest="subcommand", parser_class=_Parser)
            inner = next(a for a in group._actions if isinstance(a, argparse._SubParsersAction))
            _add_opts(inner.add_parser(tail, help=f"{name}"), opts)
        else:
            _add_opts(sub.add_parser(name, help=name), opts)
    return p


_USAGE_ERRORS = (
    CliError, GeometryError, transfer.ScheduleError, oracle.DatasetError, surrogate.SurrogateError,
    surrogate.LeakageError, inverse.InverseDesignError, metrics.MetricError, FileNotFoundError,
    IsADirectoryError, PermissionError,
)
_NUMERICAL_ERRORS = (
    surrogate.DivergenceError, transfer.TransferDivergence, oracle.OracleError, rfnet.ConversionError,
    rfnet.TerminationError, inverse.BackendError, FloatingPointError, np.linalg.LinAlgError,
)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        command = args.command
        if command and getattr(args, "subcommand", None):
            command = f"{command} {args.subcommand}"
        if command not in HANDLERS:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        cfg = resolve(command, args)
        return HANDLERS[command](cfg, _workers(args))
    except _NUMERICAL_ERRORS as exc:
        print(f"motif: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (*_USAGE_ERRORS, rfnet.RfNetError) as exc:
        print(f"motif: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
