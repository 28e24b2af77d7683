"""Synthetic EM solver: lumped coupled-coil model plus nodal analysis.

Each winding becomes one series R(f) + jwL branch.  The two branches are
magnetically coupled, every port node has an oxide capacitance to ground and
the windings are tied together by an inter-winding capacitance split evenly
between the 1-3 and 2-4 node pairs, which keeps the mirror symmetry that the
six-channel storage relies on.
"""
from __future__ import annotations

import hashlib
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rfnet
from .geometry import (
    FEATURE_NAMES,
    ParamSpace,
    XfmrGeometry,
    XfmrTemplate,
    feature_vector,
    sample_geometry,
)
from .rfnet import FrequencyGrid, SParamTensor

MU0 = 4e-7 * math.pi
SRF_REJECT_FRACTION = 0.15
MAX_REJECT_RATE = 0.5


class OracleError(RuntimeError):
    pass


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class OracleConstants:
    wheeler_k1: float = 2.34
    wheeler_k2: float = 2.75
    k0_default: float = 0.9
    k0_parallel: float = 0.95
    k0_eight: float = 0.72
    k_decay_um: float = 20.0
    k_min: float = 1e-3
    conductivity: float = 5.8e7  # S/m, copper
    thickness_um: float = 3.0
    f_skin_ghz: float = 10.0
    c_ox_ff_per_um2: float = 0.01
    c_ww_ff_per_um: float = 0.04

    @property
    def version(self) -> str:
        blob = repr(self).encode()
        return "lumped-v1-" + hashlib.sha256(blob).hexdigest()[:12]


CONSTANTS = OracleConstants()


@dataclass(frozen=True)
class LumpedModel:
    l1: float  # H
    l2: float  # H
    k: float
    r1: float  # ohm, DC
    r2: float
    f_skin: float  # Hz
    cox1: float  # F, each primary port node
    cox2: float  # F, each secondary port node
    cww: float  # F, total inter-winding

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise OracleError(f"inductances must be positive: {self.l1}, {self.l2}")
        if not 0 < self.k < 1:
            raise OracleError(f"coupling must lie in (0, 1), got {self.k}")
        if not (self.r1 > 0 and self.r2 > 0 and self.f_skin > 0):
            raise OracleError("resistances and skin corner must be positive")
        if min(self.cox1, self.cox2, self.cww) < 0:
            raise OracleError("capacitances must be nonnegative")


@dataclass(frozen=True)
class WindingShape:
    turns: int
    d_avg_um: float
    fill: float
    length_um: float


def winding_shape(g: XfmrGeometry, turns: int) -> WindingShape:
    """Square-spiral geometry of one winding.

    Turns are packed inward from the shared outer edge; an eight-shaped
    winding is two such lobes in series.
    """
    span = turns * g.trace_width + (turns - 1) * g.trace_spacing
    d_out = g.outer_dim
    d_in = d_out - 2 * span
    d_avg = 0.5 * (d_out + d_in)
    fill = (d_out - d_in) / (d_out + d_in)
    length = g.template.lobes * 4 * turns * d_avg
    return WindingShape(turns, d_avg, fill, length)


def wheeler_inductance(turns: int, d_avg_um: float, fill: float, consts: OracleConstants = CONSTANTS) -> float:
    return consts.wheeler_k1 * MU0 * turns**2 * d_avg_um * 1e-6 / (1 + consts.wheeler_k2 * fill)


def synthesize_lumped(g: XfmrGeometry, consts: OracleConstants = CONSTANTS) -> LumpedModel:
    prim = winding_shape(g, g.turns_primary)
    sec = winding_shape(g, g.turns_secondary)
    lobes = g.template.lobes
    l1 = lobes * wheeler_inductance(prim.turns, prim.d_avg_um, prim.fill, consts)
    l2 = lobes * wheeler_inductance(sec.turns, sec.d_avg_um, sec.fill, consts)
    k0 = {
        XfmrTemplate.PARALLEL_INDUCTOR: consts.k0_parallel,
        XfmrTemplate.EIGHT_SHAPED: consts.k0_eight,
    }.get(g.template, consts.k0_default)
    k = max(k0 * math.exp(-g.winding_gap / consts.k_decay_um), consts.k_min)

    def rdc(w: WindingShape) -> float:
        return w.length_um / (consts.conductivity * g.trace_width * consts.thickness_um * 1e-6)

    def cox(w: WindingShape) -> float:
        return consts.c_ox_ff_per_um2 * w.length_um * g.trace_width * 1e-15

    overlap = min(prim.length_um, sec.length_um)
    return LumpedModel(
        l1=l1,
        l2=l2,
        k=k,
        r1=rdc(prim),
        r2=rdc(sec),
        f_skin=consts.f_skin_ghz * 1e9,
        cox1=cox(prim),
        cox2=cox(sec),
        cww=consts.c_ww_ff_per_um * overlap * 1e-15,
    )


# node incidence of the two winding branches (1->2 and 3->4)
_INCIDENCE = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def nodal_admittance(m: LumpedModel, freqs_hz: np.ndarray) -> np.ndarray:
    """4x4 nodal admittance matrix per frequency, shape (K, 4, 4)."""
    f = np.asarray(freqs_hz, dtype=float)
    w = 2 * np.pi * f
    skin = 1.0 + np.sqrt(f / m.f_skin)
    mutual = m.k * math.sqrt(m.l1 * m.l2)
    zb = np.empty((len(f), 2, 2), dtype=complex)
    zb[:, 0, 0] = m.r1 * skin + 1j * w * m.l1
    zb[:, 1, 1] = m.r2 * skin + 1j * w * m.l2
    zb[:, 0, 1] = zb[:, 1, 0] = 1j * w * mutual
    y = _INCIDENCE @ np.linalg.inv(zb) @ _INCIDENCE.T
    jw = 1j * w
    for node, c in ((0, m.cox1), (1, m.cox1), (2, m.cox2), (3, m.cox2)):
        y[:, node, node] += jw * c
    half = 0.5 * m.cww
    for a, b in ((0, 2), (1, 3)):
        y[:, a, a] += jw * half
        y[:, b, b] += jw * half
        y[:, a, b] -= jw * half
        y[:, b, a] -= jw * half
    return y


def solve_sparams(m: LumpedModel, grid: FrequencyGrid, z0: float = rfnet.Z0_DEFAULT) -> SParamTensor:
    """Single-ended S-parameters referenced to z0 on every port.

    Uses S = (I - z0 Y)(I + z0 Y)^-1, which equals (Z - z0 I)(Z + z0 I)^-1
    but stays defined for floating windings where Z does not exist at DC.
    """
    y = nodal_admittance(m, grid.freqs_hz)
    try:
        s = rfnet.y_to_s(y, z0)
    except rfnet.ConversionError as exc:
        raise OracleError(f"oracle conditioning failure (bug): {exc}") from exc
    return SParamTensor.from_full(grid, s)


def simulate(g: XfmrGeometry, grid: FrequencyGrid, consts: OracleConstants = CONSTANTS) -> SParamTensor:
    return solve_sparams(synthesize_lumped(g, consts), grid)


# --- dataset generation ----------------------------------------------------


def _attempt_seed(seed: int, index: int, attempt: int) -> int:
    return int(np.random.SeedSequence([seed, index, attempt]).generate_state(1, dtype=np.uint64)[0])


def _generate_one(args):
    space, template, grid, seed, index, consts = args
    threshold = SRF_REJECT_FRACTION * grid.f_max
    rejected = 0
    for attempt in range(1000):
        g = sample_geometry(space, template, _attempt_seed(seed, index, attempt))
        t = simulate(g, grid, consts)
        srf = rfnet.detect_srf(t)
        if srf.freq_ghz >= threshold:
            return g, t, rejected
        rejected += 1
    raise DatasetError(
        f"SRF rejection rate exceeds {MAX_REJECT_RATE:.0%}: sample {index} found no geometry with SRF above "
        f"{threshold:.3g} GHz in 1000 draws; parameter space does not suit the {grid.f_max:g} GHz grid"
    )


@dataclass
class Dataset:
    template: XfmrTemplate
    grid: FrequencyGrid
    features: np.ndarray  # (n, 6) float32 values
    labels: np.ndarray  # (n, 12*K) float32 values, packed order
    geometries: list[XfmrGeometry]
    seed: int = 0
    rejected: int = 0
    oracle_version: str = CONSTANTS.version
    space: ParamSpace | None = None
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.features)

    @property
    def attempts(self) -> int:
        return len(self) + self.rejected

    def tensor(self, i: int) -> SParamTensor:
        return rfnet.unpack(self.labels[i].astype(float), self.grid)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            template=self.template,
            grid=self.grid,
            features=self.features[idx],
            labels=self.labels[idx],
            geometries=[self.geometries[i] for i in idx],
            seed=self.seed,
            rejected=self.rejected,
            oracle_version=self.oracle_version,
            space=self.space,
        )

    def split(self, seed: int, fractions=(0.8, 0.1, 0.1)) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Seeded train/val/test index split (80/10/10 by default)."""
        order = np.random.default_rng(seed).permutation(len(self))
        n_train = int(round(fractions[0] * len(self)))
        n_val = int(round(fractions[1] * len(self)))
        return order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.grid.describe().encode())
        h.update(np.ascontiguousarray(self.features, dtype="<f4").tobytes())
        h.update(np.ascontiguousarray(self.labels, dtype="<f4").tobytes())
        return h.hexdigest()


def generate_dataset(
    space: ParamSpace,
    template: XfmrTemplate,
    n_samples: int,
    grid: FrequencyGrid,
    seed: int,
    workers: int = 1,
    consts: OracleConstants = CONSTANTS,
) -> Dataset:
    """Sample geometries and simulate them, rejecting low-SRF layouts.

    Sample i only depends on (seed, i), so results are identical for any
    worker count.
    """
    if n_samples < 1:
        raise DatasetError(f"n_samples must be >= 1, got {n_samples}")
    space.validate(template)
    jobs = [(space, template, grid, seed, i, consts) for i in range(n_samples)]
    if workers > 1 and n_samples > 64:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_generate_one, jobs, chunksize=max(1, n_samples // (8 * workers))))
    else:
        results = [_generate_one(job) for job in jobs]
    rejected = sum(r[2] for r in results)
    rate = rejected / (rejected + n_samples)
    if rate > MAX_REJECT_RATE:
        raise DatasetError(
            f"SRF rejection rate {rate:.1%} exceeds {MAX_REJECT_RATE:.0%}: parameter space does not "
            f"suit the {grid.f_max:g} GHz grid (threshold {SRF_REJECT_FRACTION * grid.f_max:g} GHz)"
        )
    geoms = [r[0] for r in results]
    features = np.array([feature_vector(g) for g in geoms]).astype(np.float32)
    labels = np.array([rfnet.pack(r[1]) for r in results]).astype(np.float32)
    return Dataset(template, grid, features, labels, geoms, seed, rejected, consts.version, space)


# --- container file --------------------------------------------------------

MAGIC = b"MOTIF1\0"
_HEADER = struct.Struct("<IIIdd")


def write_dataset(ds: Dataset, path) -> Path:
    """Write the binary container and its ``.manifest`` sidecar."""
    path = Path(path)
    n, flen = ds.features.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(n, flen, ds.grid.n_points, ds.grid.f_start, ds.grid.f_step))
        feats = np.ascontiguousarray(ds.features, dtype="<f4")
        labs = np.ascontiguousarray(ds.labels, dtype="<f4")
        for i in range(n):
            fh.write(feats[i].tobytes())
            fh.write(labs[i].tobytes())
    manifest_path(path).write_text(_manifest_text(ds), encoding="utf-8")
    return path


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest")


def _manifest_text(ds: Dataset) -> str:
    lines = [
        "# MOTIF dataset manifest",
        f"template={ds.template.value}",
        f"samples={len(ds)}",
        f"grid={ds.grid.describe()}",
        f"oracle_version={ds.oracle_version}",
        f"seed={ds.seed}",
        f"rejected={ds.rejected}",
        f"features={','.join(FEATURE_NAMES)}",
    ]
    if ds.space is not None:
        lines.append("[space]")
        lines.append(ds.space.to_text().rstrip("\n"))
    for i, g in enumerate(ds.geometries):
        lines.append(f"[sample {i}]")
        lines.append(g.to_text().rstrip("\n"))
    return "\n".join(lines) + "\n"


def read_dataset(path) -> Dataset:
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(MAGIC):
        raise DatasetError(f"{path}: not a MOTIF1 dataset (bad magic)")
    off = len(MAGIC)
    if len(raw) < off + _HEADER.size:
        raise DatasetError(f"{path}: truncated header")
    n, flen, k, f_start, f_step = _HEADER.unpack_from(raw, off)
    off += _HEADER.size
    label_len = rfnet.N_REAL_CHANNELS * k
    expected = off + n * 4 * (flen + label_len)
    if len(raw) != expected:
        raise DatasetError(f"{path}: size {len(raw)} bytes, header implies {expected}")
    rows = np.frombuffer(raw, dtype="<f4", offset=off).reshape(n, flen + label_len)
    grid = FrequencyGrid(f_start, f_step, k)
    features = rows[:, :flen].astype(np.float32)
    labels = rows[:, flen:].astype(np.float32)

    meta, geoms, space = _read_manifest(manifest_path(path))
    if int(meta.get("samples", n)) != n:
        raise DatasetError(f"{path}: manifest sample count {meta['samples']} != {n}")
    template = XfmrTemplate.parse(meta["template"]) if "template" in meta else geoms[0].template
    return Dataset(
        template=template,
        grid=grid,
        features=features,
        labels=labels,
        geometries=geoms,
        seed=int(meta.get("seed", 0)),
        rejected=int(meta.get("rejected", 0)),
        oracle_version=meta.get("oracle_version", "unknown"),
        space=space,
    )


def _read_manifest(path: Path) -> tuple[dict, list[XfmrGeometry], ParamSpace | None]:
    if not path.exists():
        raise DatasetError(f"missing dataset manifest {path}")
    meta: dict[str, str] = {}
    blocks: list[list[str]] = []
    space_lines: list[str] = []
    section = "head"
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#") or not line.strip():
            continue
        if line.startswith("[sample "):
            section = "sample"
            blocks.append([])
            continue
        if line.startswith("["):
            section = "space" if line.strip() == "[space]" else "other"
            continue
        if section == "head":
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
        elif section == "sample":
            blocks[-1].append(line)
        elif section == "space":
            space_lines.append(line)
    space = ParamSpace.from_text("\n".join(space_lines)) if space_lines else None
    return meta, [XfmrGeometry.from_text("\n".join(b)) for b in blocks], space


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
