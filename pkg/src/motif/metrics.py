"""Accuracy metrics over packed S-parameter predictions.

All functions take ``(n_samples, 12 * K)`` arrays in packed channel-major order.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import rfnet
from .rfnet import N_REAL_CHANNELS, FrequencyGrid


class MetricError(ValueError):
    pass


def _blocks(preds, labels, n_points: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    p = np.atleast_2d(np.asarray(preds, dtype=float))
    y = np.atleast_2d(np.asarray(labels, dtype=float))
    if p.shape != y.shape:
        raise MetricError(f"prediction shape {p.shape} does not match label shape {y.shape}")
    if p.shape[1] % N_REAL_CHANNELS:
        raise MetricError(f"row length {p.shape[1]} is not a multiple of {N_REAL_CHANNELS}")
    k = p.shape[1] // N_REAL_CHANNELS
    if n_points is not None and k != n_points:
        raise MetricError(f"rows hold {k} frequency points, expected {n_points}")
    return p.reshape(len(p), N_REAL_CHANNELS, k), y.reshape(len(y), N_REAL_CHANNELS, k)


def mae_curve(preds, labels) -> np.ndarray:
    p, y = _blocks(preds, labels)
    return np.abs(p - y).mean(axis=(0, 1))


def mae_freq(preds, labels, k: int) -> float:
    p, y = _blocks(preds, labels)
    if not 0 <= k < p.shape[2]:
        raise MetricError(f"frequency index {k} out of range")
    return float(np.abs(p[:, :, k] - y[:, :, k]).mean())


def mae_avg(preds, labels, k_max: int | None = None) -> float:
    """Mean of the per-frequency MAE over indices 0..k_max-1 (default: all)."""
    curve = mae_curve(preds, labels)
    k_max = len(curve) if k_max is None else k_max
    if not 1 <= k_max <= len(curve):
        raise MetricError(f"k_max must lie in 1..{len(curve)}, got {k_max}")
    return float(curve[:k_max].mean())


def mae_avg_2srf(preds, labels, srf_ghz, grid: FrequencyGrid) -> float:
    """MAE restricted, per sample, to frequencies up to min(2*SRF, f_max)."""
    p, y = _blocks(preds, labels, grid.n_points)
    srf = np.asarray(srf_ghz, dtype=float).reshape(-1)
    if len(srf) != len(p):
        raise MetricError(f"{len(srf)} SRF values for {len(p)} samples")
    f = grid.freqs_ghz
    err = np.abs(p - y).mean(axis=1)  # (n, K), averaged over channels
    per_sample = []
    for i, s in enumerate(srf):
        mask = f <= min(2 * s, grid.f_max) + 1e-9 * grid.f_step
        if not mask.any():
            mask[0] = True
        per_sample.append(err[i, mask].mean())
    return float(np.mean(per_sample))


def r_squared(preds, labels) -> float:
    """Pooled coefficient of determination over every value."""
    p = np.asarray(preds, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if p.shape != y.shape:
        raise MetricError("prediction and label sizes differ")
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot <= 0:
        raise MetricError("labels have zero variance; R^2 undefined")
    return float(1.0 - np.sum((y - p) ** 2) / ss_tot)


def label_srfs(labels, grid: FrequencyGrid) -> np.ndarray:
    return np.array([rfnet.detect_srf(rfnet.unpack(row, grid)).freq_ghz for row in np.atleast_2d(labels)])


@dataclass
class EvalReport:
    grid: FrequencyGrid
    mae_curve: np.ndarray
    mae_avg_full: float
    mae_avg_2srf: float
    r2: float
    n_samples: int
    srfs: np.ndarray

    def summary(self) -> str:
        lines = [
            f"samples={self.n_samples}",
            f"mae_avg_full={self.mae_avg_full:.6f}",
            f"mae_avg_2srf={self.mae_avg_2srf:.6f}",
            f"r2={self.r2:.6f}",
            f"srf_median_ghz={np.median(self.srfs):.3f}",
            f"srf_min_ghz={np.min(self.srfs):.3f}",
            f"srf_max_ghz={np.max(self.srfs):.3f}",
        ]
        return "\n".join(lines) + "\n"

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f_GHz", "MAE_freq"])
        for f, m in zip(self.grid.freqs_ghz, self.mae_curve):
            w.writerow([f"{f:.6g}", f"{m:.8g}"])
        return buf.getvalue()


def evaluate(preds, labels, grid: FrequencyGrid, srfs=None) -> EvalReport:
    labels = np.atleast_2d(labels)
    srfs = label_srfs(labels, grid) if srfs is None else np.asarray(srfs, dtype=float)
    return EvalReport(
        grid=grid,
        mae_curve=mae_curve(preds, labels),
        mae_avg_full=mae_avg(preds, labels),
        mae_avg_2srf=mae_avg_2srf(preds, labels, srfs, grid),
        r2=r_squared(preds, labels),
        n_samples=len(labels),
        srfs=srfs,
    )
