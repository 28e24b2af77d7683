"""Frequency sub-band self-transfer training.

The grid is cut into equal sub-bands, one MLP per band.  Band 1 is trained
from scratch; afterwards each iteration sweeps upward (band i warm-starts
band i+1) and then back down (band i+1 warm-starts band i).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import surrogate
from .rfnet import N_REAL_CHANNELS, FrequencyGrid
from .surrogate import MlpModel, MlpSpec, Normalizer, TrainConfig

log = logging.getLogger(__name__)

ENSEMBLE_MANIFEST = "ensemble.json"


class ScheduleError(ValueError):
    pass


class TransferDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class Band:
    index: int  # 1-based
    lo: int  # first grid index (inclusive)
    hi: int  # last grid index (exclusive)
    f_low_ghz: float  # open lower edge
    f_high_ghz: float  # closed upper edge

    @property
    def n_points(self) -> int:
        return self.hi - self.lo


def partition(grid: FrequencyGrid, n_band: int) -> list[Band]:
    if n_band < 1 or grid.n_points % n_band:
        raise ScheduleError(
            f"number of sub-bands ({n_band}) must divide the number of grid points ({grid.n_points})"
        )
    size = grid.n_points // n_band
    f = grid.freqs_ghz
    bands = []
    for i in range(1, n_band + 1):
        lo, hi = (i - 1) * size, i * size
        f_low = f[lo] - grid.f_step if lo else 0.0
        bands.append(Band(i, lo, hi, float(f_low), float(f[hi - 1])))
    return bands


def band_slice(labels: np.ndarray, n_points: int, band: Band) -> np.ndarray:
    """Packed labels restricted to one band, still channel-major."""
    labels = np.atleast_2d(labels)
    return labels.reshape(len(labels), N_REAL_CHANNELS, n_points)[:, :, band.lo : band.hi].reshape(len(labels), -1)


def assemble(parts: list[np.ndarray], bands: list[Band], n_points: int) -> np.ndarray:
    """Inverse of band_slice: stitch band predictions into packed vectors."""
    n = len(parts[0])
    out = np.empty((n, N_REAL_CHANNELS, n_points))
    for part, band in zip(parts, bands):
        out[:, :, band.lo : band.hi] = part.reshape(n, N_REAL_CHANNELS, band.n_points)
    return out.reshape(n, -1)


@dataclass(frozen=True)
class TransferSchedule:
    n_band: int = 10
    iterations: int = 3
    visit: TrainConfig = TrainConfig(epochs=30, patience=10)
    bootstrap: TrainConfig | None = None  # defaults to ``visit``

    def __post_init__(self):
        if self.n_band < 1 or self.iterations < 1:
            raise ScheduleError(f"need n_band >= 1 and iterations >= 1, got {self.n_band}, {self.iterations}")

    @property
    def total_visits(self) -> int:
        return 1 + 2 * self.iterations * (self.n_band - 1)


@dataclass
class Visit:
    iteration: int  # 0 for the band-1 bootstrap
    direction: str  # "bootstrap", "forward" or "backward"
    band: int
    source: int | None
    epochs: int
    val_loss: float


@dataclass
class BandEnsemble:
    grid: FrequencyGrid
    bands: list[Band]
    models: list[MlpModel]
    provenance: list[Visit] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return sum(m.spec.n_params for m in self.models)

    def predict(self, x) -> np.ndarray:
        """Packed full-band predictions for a batch of feature vectors."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return assemble([m.forward(x) for m in self.models], self.bands, self.grid.n_points)


def predict_full(e: BandEnsemble, x):
    """Predicted S-parameters for one feature vector."""
    from .rfnet import unpack

    return unpack(e.predict(x)[0], e.grid)


def _band_data(x, y, grid, band):
    return np.asarray(x, dtype=float), band_slice(np.asarray(y, dtype=float), grid.n_points, band)


def _band_spec(width: tuple[int, ...], band: Band, activation: str, input_dim: int) -> MlpSpec:
    return MlpSpec(input_dim, width, N_REAL_CHANNELS * band.n_points, activation)


def run_self_transfer(
    train,
    val,
    grid: FrequencyGrid,
    schedule: TransferSchedule,
    seed: int,
    hidden: tuple[int, ...] = (64, 64, 64),
    activation: str = "relu",
    on_visit=None,
) -> BandEnsemble:
    """Train sub-band models with forward/backward warm-start sweeps.

    ``train`` and ``val`` are (features, packed labels) pairs over the full
    grid.  Adam moments restart at every visit.
    """
    bands = partition(grid, schedule.n_band)
    x_tr, y_tr = (np.asarray(a, dtype=float) for a in train)
    x_va, y_va = (np.asarray(a, dtype=float) for a in val)
    if y_tr.shape[1] != N_REAL_CHANNELS * grid.n_points:
        raise ScheduleError(f"labels have {y_tr.shape[1]} values, grid needs {N_REAL_CHANNELS * grid.n_points}")
    input_dim = x_tr.shape[1]
    per_band = [(_band_data(x_tr, y_tr, grid, b), _band_data(x_va, y_va, grid, b)) for b in bands]
    models: list[MlpModel | None] = [None] * len(bands)
    log_entries: list[Visit] = []
    visit_no = 0

    def train_band(i: int, model: MlpModel, iteration: int, direction: str, source, cfg: TrainConfig):
        nonlocal visit_no
        (xb, yb), (xv, yv) = per_band[i]
        cfg = TrainConfig(**{**vars(cfg), "seed": seed * 1_000_003 + visit_no})
        try:
            result = surrogate.fit(model, (xb, yb), (xv, yv), cfg)
        except surrogate.DivergenceError as exc:
            raise TransferDivergence(
                f"band {i + 1} diverged during {direction} sweep of iteration {iteration}: {exc}"
            ) from exc
        result.model.meta.update(band=bands[i].index, last_visit=visit_no)
        models[i] = result.model
        entry = Visit(iteration, direction, i + 1, source, len(result.val_loss), result.best_val)
        log_entries.append(entry)
        visit_no += 1
        if on_visit:
            on_visit(entry)
        log.debug("visit %d: %s", visit_no, entry)

    (xb, yb), _ = per_band[0]
    spec0 = _band_spec(hidden, bands[0], activation, input_dim)
    first = surrogate.init_model(spec0, seed, Normalizer.fit(xb, yb, bands[0].n_points))
    train_band(0, first, 0, "bootstrap", None, schedule.bootstrap or schedule.visit)

    def warm(dst: int, src: int) -> MlpModel:
        (xb, yb), _ = per_band[dst]
        template = models[dst] or models[src]
        return surrogate.init_from(template, models[src], y_train=yb, x_train=xb)

    for t in range(1, schedule.iterations + 1):
        for i in range(schedule.n_band - 1):
            train_band(i + 1, warm(i + 1, i), t, "forward", i + 1, schedule.visit)
        for i in range(schedule.n_band - 2, -1, -1):
            train_band(i, warm(i, i + 1), t, "backward", i + 2, schedule.visit)

    return BandEnsemble(
        grid,
        bands,
        list(models),
        log_entries,
        {"n_band": schedule.n_band, "iterations": schedule.iterations, "seed": seed, "hidden": list(hidden)},
    )


def train_independent(
    train, val, grid: FrequencyGrid, n_band: int, cfg: TrainConfig, seed: int,
    hidden: tuple[int, ...] = (64, 64, 64), activation: str = "relu",
) -> BandEnsemble:
    """Sub-band models trained separately from fresh initializations (no transfer)."""
    bands = partition(grid, n_band)
    x_tr, y_tr = (np.asarray(a, dtype=float) for a in train)
    x_va, y_va = (np.asarray(a, dtype=float) for a in val)
    models = []
    for b in bands:
        (xb, yb), (xv, yv) = _band_data(x_tr, y_tr, grid, b), _band_data(x_va, y_va, grid, b)
        spec = _band_spec(hidden, b, activation, x_tr.shape[1])
        model = surrogate.init_model(spec, seed + b.index, Normalizer.fit(xb, yb, b.n_points))
        res = surrogate.fit(model, (xb, yb), (xv, yv), TrainConfig(**{**vars(cfg), "seed": seed + b.index}))
        models.append(res.model)
    return BandEnsemble(grid, bands, models, [], {"n_band": n_band, "iterations": 0, "seed": seed})


def train_monolithic(
    train, val, grid: FrequencyGrid, cfg: TrainConfig, seed: int,
    hidden: tuple[int, ...] = (256, 256, 256), activation: str = "relu",
) -> tuple[BandEnsemble, surrogate.FitResult]:
    """One full-band model, wrapped as a single-band ensemble."""
    x_tr, y_tr = (np.asarray(a, dtype=float) for a in train)
    spec = MlpSpec(x_tr.shape[1], hidden, N_REAL_CHANNELS * grid.n_points, activation)
    model = surrogate.init_model(spec, seed, Normalizer.fit(x_tr, y_tr, grid.n_points))
    res = surrogate.fit(model, (x_tr, y_tr), val, TrainConfig(**{**vars(cfg), "seed": seed}))
    bands = partition(grid, 1)
    return BandEnsemble(grid, bands, [res.model], [], {"n_band": 1, "iterations": 0, "seed": seed}), res


def boundary_jump(e: BandEnsemble, x) -> float:
    """Mean |prediction step| across internal band edges."""
    if len(e.bands) < 2:
        return 0.0
    pred = e.predict(x).reshape(len(np.atleast_2d(x)), N_REAL_CHANNELS, e.grid.n_points)
    edges = [b.lo for b in e.bands[1:]]
    return float(np.mean([np.abs(pred[:, :, k] - pred[:, :, k - 1]).mean() for k in edges]))


# --- persistence -----------------------------------------------------------------


def save_ensemble(e: BandEnsemble, directory, dataset_hash: str = "", extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for band, model in zip(e.bands, e.models):
        name = f"band_{band.index:03d}{surrogate.CHECKPOINT_SUFFIX}"
        surrogate.save_checkpoint(
            model, directory / name,
            {"band_index": band.index, "grid_lo": band.lo, "grid_hi": band.hi,
             "f_low_ghz": band.f_low_ghz, "f_high_ghz": band.f_high_ghz},
        )
        files.append(name)
    manifest = {
        "grid": [e.grid.f_start, e.grid.f_step, e.grid.n_points],
        "bands": files,
        "meta": e.meta,
        "dataset_hash": dataset_hash,
        "provenance": [vars(v) for v in e.provenance],
        **(extra or {}),
    }
    (directory / ENSEMBLE_MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return directory


def load_ensemble(directory) -> tuple[BandEnsemble, dict]:
    directory = Path(directory)
    path = directory / ENSEMBLE_MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"no ensemble manifest at {path}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    grid = FrequencyGrid(*manifest["grid"])
    models = [surrogate.load_checkpoint(directory / name) for name in manifest["bands"]]
    bands = partition(grid, len(models))
    prov = [Visit(**v) for v in manifest.get("provenance", [])]
    return BandEnsemble(grid, bands, models, prov, manifest.get("meta", {})), manifest
