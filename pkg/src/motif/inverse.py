"""Impedance-matching inverse design with CMA-ES.

A candidate is a transformer geometry plus two shunt capacitors, one across
the differential input and one across the output.  The cost adds a layout
area term to a window-weighted sum of |Gamma_in| and (1 - |L|) over the
frequency grid.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import oracle, rfnet
from .cmaes import CmaesConfig, CmaesResult, cmaes_minimize
from .geometry import (
    CONTINUOUS_FIELDS,
    ParamSpace,
    XfmrGeometry,
    XfmrTemplate,
    area_mm2,
    feature_vector,
    footprint_violation,
)
from .rfnet import ComplexPortSpec, FrequencyGrid, SParamTensor
from .transfer import BandEnsemble

C_MAX_FF = 500.0
MATCH_THRESHOLD_DB = -10.0
INVALID_COST = 1e6
# dB comparisons clip both curves here; deeper nulls do not affect the -10 dB decision
GAMMA_FLOOR_DB = -20.0


class InverseDesignError(ValueError):
    pass


class BackendError(RuntimeError):
    pass


@dataclass(frozen=True)
class MatchTarget:
    z01: complex
    z02: complex
    fc_ghz: float
    bandwidth_ghz: float
    rho: int = 1

    def __post_init__(self):
        ComplexPortSpec(self.z01, self.z02)
        if not self.bandwidth_ghz > 0:
            raise InverseDesignError(f"bandwidth must be positive, got {self.bandwidth_ghz}")
        if int(self.rho) != self.rho or self.rho < 1:
            raise InverseDesignError(f"window index must be a positive integer, got {self.rho}")

    @property
    def ports(self) -> ComplexPortSpec:
        return ComplexPortSpec(self.z01, self.z02)

    @property
    def band_edges(self) -> tuple[float, float]:
        half = self.bandwidth_ghz / 2
        return self.fc_ghz - half, self.fc_ghz + half

    def check_grid(self, grid: FrequencyGrid) -> None:
        lo, hi = self.band_edges
        if not (lo > grid.f_start and hi < grid.f_max):
            raise InverseDesignError(
                f"target band {lo:g}..{hi:g} GHz must lie inside the grid ({grid.f_start:g}..{grid.f_max:g} GHz)"
            )

    def in_band(self, grid: FrequencyGrid) -> np.ndarray:
        lo, hi = self.band_edges
        f = grid.freqs_ghz
        tol = 1e-9 * grid.f_step
        return (f >= lo - tol) & (f <= hi + tol)


@dataclass(frozen=True)
class CostWeights:
    area: float = 1.0  # per mm^2
    gamma: float = 1.0
    loss: float = 1.0

    def __post_init__(self):
        if min(self.area, self.gamma, self.loss) < 0:
            raise InverseDesignError("cost weights must be nonnegative")


@dataclass(frozen=True)
class MatchCandidate:
    geometry: XfmrGeometry
    c1_ff: float = 0.0
    c2_ff: float = 0.0
    c_max_ff: float = C_MAX_FF

    def __post_init__(self):
        for name, c in (("C1", self.c1_ff), ("C2", self.c2_ff)):
            if not 0 <= c <= self.c_max_ff:
                raise InverseDesignError(f"{name} = {c} fF outside [0, {self.c_max_ff}] fF")

    def describe(self) -> str:
        return self.geometry.to_text() + f"C1_fF={self.c1_ff!r}\nC2_fF={self.c2_ff!r}\n"


def window(f_ghz, target: MatchTarget) -> np.ndarray:
    """Super-Gaussian weight: 1 at fc, 1/2 at fc +- bandwidth/2, flatter for larger rho."""
    f = np.asarray(f_ghz, dtype=float)
    x = 2.0 * np.abs(f - target.fc_ghz) / target.bandwidth_ghz
    return np.exp(-math.log(2.0) * x ** (2 * target.rho))


# --- backends -------------------------------------------------------------------


class OracleBackend:
    """Exact evaluation through the lumped solver."""

    def __init__(self, grid: FrequencyGrid, consts: oracle.OracleConstants = oracle.CONSTANTS):
        self.grid = grid
        self.consts = consts

    def tensors(self, geoms: list[XfmrGeometry]) -> list[SParamTensor]:
        return [oracle.simulate(g, self.grid, self.consts) for g in geoms]


class SurrogateBackend:
    """Evaluation through a trained sub-band ensemble."""

    def __init__(self, ensemble: BandEnsemble):
        self.ensemble = ensemble
        self.grid = ensemble.grid

    def tensors(self, geoms: list[XfmrGeometry]) -> list[SParamTensor]:
        x = np.array([feature_vector(g) for g in geoms])
        try:
            packed = self.ensemble.predict(x)
            return [rfnet.unpack(row, self.grid) for row in packed]
        except Exception as exc:
            raise BackendError(f"surrogate prediction failed for {[g.to_text() for g in geoms]}: {exc}") from exc


@dataclass
class Curves:
    freqs_ghz: np.ndarray
    gamma: np.ndarray  # complex power-wave reflection
    loss: np.ndarray  # |L|, linear

    @property
    def gamma_db(self) -> np.ndarray:
        return rfnet.db20(self.gamma)

    @property
    def loss_db(self) -> np.ndarray:
        return rfnet.db20(self.loss)


def matched_sdd(t: SParamTensor, c1_ff: float, c2_ff: float) -> np.ndarray:
    return rfnet.add_shunt_caps(rfnet.differential_sdd(t), t.grid.freqs_ghz, c1_ff, c2_ff)


def candidate_curves(t: SParamTensor, cand: MatchCandidate, target: MatchTarget) -> Curves:
    sdd = matched_sdd(t, cand.c1_ff, cand.c2_ff)
    return Curves(t.grid.freqs_ghz, rfnet.gamma_in(sdd, target.ports), rfnet.loss_mag(sdd, target.ports))


def cost_from_curves(curves: Curves, geometry: XfmrGeometry, target: MatchTarget, weights: CostWeights) -> float:
    wf = window(curves.freqs_ghz, target)
    terms = weights.gamma * np.abs(curves.gamma) + weights.loss * (1.0 - curves.loss)
    return float(weights.area * area_mm2(geometry) + np.sum(wf * terms))


def cost_js(cand: MatchCandidate, target: MatchTarget, weights: CostWeights, backend) -> float:
    t = backend.tensors([cand.geometry])[0]
    return cost_from_curves(candidate_curves(t, cand, target), cand.geometry, target, weights)


# --- search space -------------------------------------------------------------------


@dataclass(frozen=True)
class SearchSpace:
    """Continuous box for (outer_dim, width, spacing, gap, C1, C2)."""

    template: XfmrTemplate
    turns: tuple[int, int]
    space: ParamSpace
    c_max_ff: float = C_MAX_FF

    @property
    def lower(self) -> tuple[float, ...]:
        return tuple(iv[0] for iv in self.space.intervals().values()) + (0.0, 0.0)

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(iv[1] for iv in self.space.intervals().values()) + (self.c_max_ff, self.c_max_ff)

    def violation(self, x) -> str | None:
        m, n = self.turns
        return footprint_violation(x[0], x[1], x[2], m, n)

    def candidate(self, x) -> MatchCandidate:
        x = np.asarray(x, dtype=float)
        m, n = self.turns
        g = XfmrGeometry(self.template, m, n, *(float(v) for v in x[:4]))
        c1, c2 = (float(np.clip(v, 0.0, self.c_max_ff)) for v in x[4:6])
        return MatchCandidate(g, c1, c2, self.c_max_ff)

    def vector(self, cand: MatchCandidate) -> np.ndarray:
        g = cand.geometry
        return np.array([getattr(g, f) for f in CONTINUOUS_FIELDS] + [cand.c1_ff, cand.c2_ff])


def batch_costs(points: np.ndarray, search: SearchSpace, target: MatchTarget, weights: CostWeights, backend) -> np.ndarray:
    """Costs for a population; invalid layouts and singular terminations get INVALID_COST."""
    costs = np.full(len(points), INVALID_COST)
    valid, cands = [], []
    for i, x in enumerate(points):
        if search.violation(x) is None:
            valid.append(i)
            cands.append(search.candidate(x))
    if not cands:
        return costs
    tensors = backend.tensors([c.geometry for c in cands])
    for i, cand, t in zip(valid, cands, tensors):
        try:
            costs[i] = cost_from_curves(candidate_curves(t, cand, target), cand.geometry, target, weights)
        except rfnet.TerminationError:
            pass
    return costs


# --- design loop --------------------------------------------------------------------


@dataclass
class Verification:
    oracle_cost: float
    surrogate_cost: float
    cost_gap: float  # relative, |surrogate - oracle| / oracle
    max_gamma_gap_db: float  # in-band, |dB(surrogate) - dB(oracle)| with both floored at GAMMA_FLOOR_DB
    max_gamma_gap_lin: float
    oracle_curves: Curves
    surrogate_curves: Curves | None
    oracle_tensor: SParamTensor


def verify_with_oracle(
    cand: MatchCandidate,
    target: MatchTarget,
    weights: CostWeights,
    grid: FrequencyGrid,
    surrogate=None,
) -> Verification:
    """Re-evaluate a candidate with the exact solver and compare with the surrogate."""
    orc = OracleBackend(grid)
    t_orc = orc.tensors([cand.geometry])[0]
    c_orc = candidate_curves(t_orc, cand, target)
    j_orc = cost_from_curves(c_orc, cand.geometry, target, weights)
    if surrogate is None:
        c_sur, j_sur = c_orc, j_orc
    else:
        t_sur = surrogate.tensors([cand.geometry])[0]
        c_sur = candidate_curves(t_sur, cand, target)
        j_sur = cost_from_curves(c_sur, cand.geometry, target, weights)
    band = target.in_band(grid)
    sur_db = np.maximum(c_sur.gamma_db[band], GAMMA_FLOOR_DB)
    orc_db = np.maximum(c_orc.gamma_db[band], GAMMA_FLOOR_DB)
    gap_db = float(np.max(np.abs(sur_db - orc_db)))
    gap_lin = float(np.max(np.abs(np.abs(c_sur.gamma[band]) - np.abs(c_orc.gamma[band]))))
    rel = abs(j_sur - j_orc) / abs(j_orc) if j_orc else (0.0 if j_sur == j_orc else math.inf)
    return Verification(j_orc, j_sur, rel, gap_db, gap_lin, c_orc, None if surrogate is None else c_sur, t_orc)


@dataclass
class DesignReport:
    status: str  # success | no-feasible-design
    target: MatchTarget
    weights: CostWeights
    candidate: MatchCandidate
    surrogate_cost: float
    verification: Verification
    search: CmaesResult
    wall_time_s: float
    in_band_gamma_db_max: float
    extra: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.status == "success"

    def text(self) -> str:
        t, w, v = self.target, self.weights, self.verification
        lines = [
            "# MOTIF inverse design report",
            f"status={self.status}",
            f"z01={t.z01.real!r},{t.z01.imag!r}",
            f"z02={t.z02.real!r},{t.z02.imag!r}",
            f"fc_ghz={t.fc_ghz!r}",
            f"bw_ghz={t.bandwidth_ghz!r}",
            f"rho={t.rho}",
            f"w_area={w.area!r}",
            f"w_gamma={w.gamma!r}",
            f"w_loss={w.loss!r}",
            "[candidate]",
            self.candidate.describe().rstrip("\n"),
            "[result]",
            f"area_mm2={area_mm2(self.candidate.geometry)!r}",
            f"surrogate_cost={self.surrogate_cost:.6g}",
            f"oracle_cost={v.oracle_cost:.6g}",
            f"cost_gap={v.cost_gap:.4%}",
            f"in_band_gamma_db_max_oracle={self.in_band_gamma_db_max:.3f}",
            f"in_band_gamma_gap_db_max={v.max_gamma_gap_db:.3f}",
            f"evaluations={self.search.evals}",
            f"search_status={self.search.status}",
        ]
        return "\n".join(lines) + "\n"


def inverse_design(
    target: MatchTarget,
    weights: CostWeights,
    template: XfmrTemplate,
    turns: tuple[int, int],
    ensemble: BandEnsemble | OracleBackend | SurrogateBackend,
    cfg: CmaesConfig | None = None,
    space: ParamSpace | None = None,
    c_max_ff: float = C_MAX_FF,
    workers: int = 1,
) -> DesignReport:
    """Search the surrogate for a matching design, then check it with the oracle.

    The box in ``cfg`` is replaced by the one derived from ``space`` and
    ``c_max_ff``; only its search settings are used.  ``ensemble`` may also
    be a ready backend such as OracleBackend.
    """
    grid = ensemble.grid
    target.check_grid(grid)
    space = space or ParamSpace.default(template)
    search = SearchSpace(template, tuple(turns), space, c_max_ff)
    cfg = replace(cfg or CmaesConfig((0.0,), (1.0,)), lower=search.lower, upper=search.upper)
    backend = ensemble if hasattr(ensemble, "tensors") else SurrogateBackend(ensemble)
    start = time.monotonic()

    def objective(points: np.ndarray) -> np.ndarray:
        if workers > 1 and len(points) >= 2 * workers:
            from concurrent.futures import ThreadPoolExecutor

            chunks = np.array_split(points, workers)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda c: batch_costs(c, search, target, weights, backend), chunks))
            return np.concatenate(parts)
        return batch_costs(points, search, target, weights, backend)

    res = cmaes_minimize(objective, cfg, vectorized=True, feasible=lambda x: search.violation(x) is None)
    if search.violation(res.best_x) is not None:
        raise InverseDesignError("search found no layout satisfying the footprint constraint")
    cand = search.candidate(res.best_x)
    ver = verify_with_oracle(cand, target, weights, grid, backend)
    band = target.in_band(grid)
    worst = float(np.max(ver.oracle_curves.gamma_db[band]))
    status = "success" if worst < MATCH_THRESHOLD_DB else "no-feasible-design"
    return DesignReport(
        status=status,
        target=target,
        weights=weights,
        candidate=cand,
        surrogate_cost=res.best_f,
        verification=ver,
        search=res,
        wall_time_s=time.monotonic() - start,
        in_band_gamma_db_max=worst,
    )


def conjugate_match_target(
    cand: MatchCandidate, grid: FrequencyGrid, fc_ghz: float, bandwidth_ghz: float, rho: int = 1
) -> MatchTarget:
    """Target whose source/load impedances conjugately match ``cand`` at fc.

    Used to build targets that are feasible by construction.
    """
    t = oracle.simulate(cand.geometry, grid)
    sdd = matched_sdd(t, cand.c1_ff, cand.c2_ff)
    k = int(np.argmin(np.abs(grid.freqs_ghz - fc_ghz)))
    zs, zl = rfnet.conjugate_match_impedances(sdd[k])
    return MatchTarget(zs, zl, float(grid.freqs_ghz[k]), bandwidth_ghz, rho)


def curves_csv(report: DesignReport) -> str:
    v = report.verification
    orc = v.oracle_curves
    sur = v.surrogate_curves or orc
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f_GHz", "gamma_dB_surrogate", "gamma_dB_oracle", "L_dB_surrogate", "L_dB_oracle"])
    for row in zip(orc.freqs_ghz, sur.gamma_db, orc.gamma_db, sur.loss_db, orc.loss_db):
        w.writerow([f"{row[0]:.6g}"] + [f"{x:.6f}" for x in row[1:]])
    return buf.getvalue()


def write_report_bundle(report: DesignReport, directory) -> dict[str, Path]:
    """Report text, CSV curves, oracle Touchstone file and SVG plots."""
    from . import plotting

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    v = report.verification
    sur = v.surrogate_curves or v.oracle_curves
    f = v.oracle_curves.freqs_ghz
    paths = {
        "report": directory / "report.txt",
        "curves": directory / "curves.csv",
        "touchstone": directory / "design.s4p",
        "gamma_svg": directory / "gamma_in.svg",
        "loss_svg": directory / "loss.svg",
    }
    paths["report"].write_text(report.text(), encoding="utf-8")
    paths["curves"].write_text(curves_csv(report), encoding="utf-8")
    rfnet.touchstone_write(v.oracle_tensor, paths["touchstone"])
    plotting.line_plot(
        paths["gamma_svg"], f,
        {"surrogate": sur.gamma_db, "oracle": v.oracle_curves.gamma_db},
        "Frequency (GHz)", "|Gamma_in| (dB)", hlines=(MATCH_THRESHOLD_DB,),
    )
    plotting.line_plot(
        paths["loss_svg"], f,
        {"surrogate": sur.loss_db, "oracle": v.oracle_curves.loss_db},
        "Frequency (GHz)", "|L| (dB)",
    )
    return paths
