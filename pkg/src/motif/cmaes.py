"""Box-constrained (mu/mu_w, lambda)-CMA-ES.

Search happens in the unit cube; the caller's box is an affine image of it,
so ``sigma0`` is a fraction of each box width.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

RESAMPLE_TRIES = 100


@dataclass(frozen=True)
class CmaesConfig:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    popsize: int | None = None
    parents: int | None = None
    sigma0: float = 0.3
    max_evals: int = 10_000
    seed: int = 0
    target: float | None = None
    x0: tuple[float, ...] | None = None
    max_seconds: float | None = None
    tol_x: float = 1e-12
    penalty: float = 100.0

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != hi.shape or lo.ndim != 1 or not np.all(lo < hi):
            raise ValueError("box bounds must be equal-length vectors with lower < upper")
        if not 0 < self.sigma0 <= 1:
            raise ValueError(f"sigma0 must lie in (0, 1], got {self.sigma0}")
        lam = self.lam
        if lam < 4:
            raise ValueError(f"population must be >= 4, got {lam}")
        if not 1 <= self.mu <= lam // 2:
            raise ValueError(f"parent count must lie in 1..{lam // 2}, got {self.mu}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lam(self) -> int:
        return default_popsize(self.dim) if self.popsize is None else self.popsize

    @property
    def mu(self) -> int:
        return self.lam // 2 if self.parents is None else self.parents


def default_popsize(n: int) -> int:
    return 4 + int(math.floor(3 * math.log(n)))


@dataclass
class CmaesResult:
    best_x: np.ndarray
    best_f: float
    history: list[float]  # best-so-far after each generation
    evals: int
    status: str  # target | budget | time | tolx
    evals_to_target: int | None = None
    candidates: list[np.ndarray] = field(default_factory=list)


def cmaes_minimize(
    objective,
    cfg: CmaesConfig,
    vectorized: bool = False,
    workers: int = 1,
    feasible=None,
    record: bool = False,
) -> CmaesResult:
    """Minimize ``objective`` over the box in ``cfg``.

    ``objective`` maps one point to a float, or a (lambda, n) array to a
    vector when ``vectorized``.  ``feasible`` optionally rejects points inside
    the box; such offspring are resampled like out-of-box ones.  Offspring
    still infeasible after 100 draws are clipped to the box and charged a
    quadratic penalty on the clipped distance.
    """
    n = cfg.dim
    lo = np.asarray(cfg.lower, float)
    width = np.asarray(cfg.upper, float) - lo
    rng = np.random.default_rng(cfg.seed)
    lam, mu = cfg.lam, cfg.mu

    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w**2)
    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

    mean = np.full(n, 0.5) if cfg.x0 is None else (np.asarray(cfg.x0, float) - lo) / width
    sigma = cfg.sigma0
    cov = np.eye(n)
    pc = np.zeros(n)
    ps = np.zeros(n)
    basis, scales = np.eye(n), np.ones(n)

    def to_box(u):
        return lo + u * width

    def inside(u):
        if np.any(u < 0) or np.any(u > 1):
            return False
        return feasible is None or bool(feasible(to_box(u)))

    def evaluate(points: np.ndarray) -> np.ndarray:
        if vectorized:
            return np.asarray(objective(points), dtype=float).reshape(len(points))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return np.array(list(pool.map(objective, points)), dtype=float)
        return np.array([objective(p) for p in points], dtype=float)

    best_x, best_f = to_box(mean), math.inf
    history: list[float] = []
    candidates: list[np.ndarray] = []
    evals, generation = 0, 0
    evals_to_target = None
    status = "budget"
    start = time.monotonic()

    while evals < cfg.max_evals:
        steps = np.empty((lam, n))
        points = np.empty((lam, n))
        penalty = np.zeros(lam)
        for k in range(lam):
            for _ in range(RESAMPLE_TRIES):
                step = basis @ (scales * rng.standard_normal(n))
                u = mean + sigma * step
                if inside(u):
                    break
            else:
                clipped = np.clip(u, 0.0, 1.0)
                penalty[k] = cfg.penalty * float(np.sum((u - clipped) ** 2))
                u = clipped
            steps[k] = (u - mean) / sigma if penalty[k] == 0 else step
            points[k] = u
        x = to_box(points)
        f = evaluate(x) + penalty
        evals += lam
        generation += 1
        if record:
            candidates.append(x.copy())

        order = np.argsort(f, kind="stable")
        if f[order[0]] < best_f:
            best_f, best_x = float(f[order[0]]), x[order[0]].copy()
        history.append(best_f)
        if cfg.target is not None and best_f <= cfg.target:
            evals_to_target = evals_to_target or evals
            status = "target"
            break

        sel = steps[order[:mu]]
        old_mean = mean
        mean = mean + sigma * (w @ sel)
        shift = (mean - old_mean) / sigma
        inv_sqrt = basis @ np.diag(1.0 / scales) @ basis.T
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (inv_sqrt @ shift)
        hsig = np.linalg.norm(ps) / math.sqrt(1 - (1 - cs) ** (2 * generation)) / chi_n < 1.4 + 2 / (n + 1)
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * shift
        rank_mu = (sel * w[:, None]).T @ sel
        cov = (
            (1 - c1 - cmu) * cov
            + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * cov)
            + cmu * rank_mu
        )
        sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1))
        sigma = min(sigma, 1e3)

        cov = np.triu(cov) + np.triu(cov, 1).T
        eigval, basis = np.linalg.eigh(cov)
        scales = np.sqrt(np.maximum(eigval, 1e-300))

        if sigma * scales.max() < cfg.tol_x:
            status = "tolx"
            break
        if cfg.max_seconds is not None and time.monotonic() - start > cfg.max_seconds:
            status = "time"
            break

    return CmaesResult(best_x, best_f, history, evals, status, evals_to_target, candidates)


# reference test problems


def sphere(x) -> float:
    x = np.asarray(x, float)
    return float(np.dot(x, x))


def rosenbrock(x) -> float:
    x = np.asarray(x, float)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))
