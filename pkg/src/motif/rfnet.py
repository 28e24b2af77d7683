"""S-parameter algebra for symmetric, reciprocal four-port transformers.

Port numbering: ports 1 and 2 are the two ends of the primary winding, ports
3 and 4 the two ends of the secondary.  Only six channels are stored::

    S11, S12, S13, S14, S33, S34

The remaining ten entries follow from reciprocity and from the layout mirror
that swaps 1<->2 and 3<->4 at the same time.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

Z0_DEFAULT = 50.0
CHANNELS = ("S11", "S12", "S13", "S14", "S33", "S34")
N_CHANNELS = len(CHANNELS)
N_REAL_CHANNELS = 2 * N_CHANNELS
Q_CAP = 1e4

# (row, col) of each 4x4 entry -> stored channel index
_COMPLETION = {
    (0, 0): 0, (1, 1): 0,
    (0, 1): 1, (1, 0): 1,
    (0, 2): 2, (2, 0): 2, (1, 3): 2, (3, 1): 2,
    (0, 3): 3, (3, 0): 3, (1, 2): 3, (2, 1): 3,
    (2, 2): 4, (3, 3): 4,
    (2, 3): 5, (3, 2): 5,
}
_CANONICAL = ((0, 0), (0, 1), (0, 2), (0, 3), (2, 2), (2, 3))
_COMPLETION_ROWS = np.array([[_COMPLETION[(r, c)] for c in range(4)] for r in range(4)])

# differential-mode rows of the mixed-mode transform
_DIFF_MODE = np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]]) / math.sqrt(2.0)


class RfNetError(ValueError):
    pass


class ConversionError(RfNetError):
    """Singular matrix met while converting between network representations."""


class TerminationError(RfNetError):
    pass


class TouchstoneError(RfNetError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class FrequencyGrid:
    f_start: float  # GHz
    f_step: float  # GHz
    n_points: int

    def __post_init__(self):
        if not self.f_start > 0 or not self.f_step > 0:
            raise RfNetError(f"grid needs positive start and step, got {self.f_start}, {self.f_step}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise RfNetError(f"grid needs at least 2 points, got {self.n_points}")

    @classmethod
    def half_ghz(cls) -> "FrequencyGrid":
        """0.5 GHz step up to 100 GHz."""
        return cls(0.5, 0.5, 200)

    @classmethod
    def one_ghz(cls) -> "FrequencyGrid":
        """1 GHz step up to 200 GHz."""
        return cls(1.0, 1.0, 200)

    @property
    def freqs_ghz(self) -> np.ndarray:
        return self.f_start + self.f_step * np.arange(self.n_points)

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.freqs_ghz * 1e9

    @property
    def f_max(self) -> float:
        return self.f_start + self.f_step * (self.n_points - 1)

    def refined(self) -> "FrequencyGrid":
        """Grid with half the step covering the same span."""
        return FrequencyGrid(self.f_start, self.f_step / 2, 2 * self.n_points - 1)

    def describe(self) -> str:
        return f"{self.f_start!r},{self.f_step!r},{self.n_points}"


@dataclass(frozen=True, eq=False)
class SParamTensor:
    grid: FrequencyGrid
    data: np.ndarray  # complex, shape (6, n_points)

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.shape != (N_CHANNELS, self.grid.n_points):
            raise RfNetError(f"tensor data must have shape (6, {self.grid.n_points}), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise RfNetError("tensor contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def __eq__(self, other):
        if not isinstance(other, SParamTensor):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.data, other.data)

    def channel(self, name: str) -> np.ndarray:
        return self.data[CHANNELS.index(name)]

    @classmethod
    def from_full(cls, grid: FrequencyGrid, s_full: np.ndarray) -> "SParamTensor":
        """Compress (K, 4, 4) matrices by reading the six canonical entries."""
        s_full = np.asarray(s_full)
        return cls(grid, np.stack([s_full[:, r, c] for r, c in _CANONICAL]))


def expand_full(t: SParamTensor, k: int) -> np.ndarray:
    if not 0 <= k < t.grid.n_points:
        raise IndexError(f"frequency index {k} outside 0..{t.grid.n_points - 1}")
    return t.data[:, k][_COMPLETION_ROWS]


def expand_all(t: SParamTensor) -> np.ndarray:
    """All frequencies at once, shape (K, 4, 4)."""
    return np.moveaxis(t.data[_COMPLETION_ROWS], -1, 0)


def _check_square(m: np.ndarray) -> None:
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise RfNetError(f"expected square matrices, got shape {m.shape}")


def _solve_right(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    """a @ inv(b), per frequency, naming the first singular frequency index."""
    finite = np.all(np.isfinite(b), axis=(-2, -1))
    if not np.all(finite):
        raise ConversionError(f"{what} has non-finite entries at frequency index {int(np.flatnonzero(~np.atleast_1d(finite))[0])}")
    cond = np.linalg.cond(b)
    bad = np.flatnonzero(~np.isfinite(np.atleast_1d(cond)) | (np.atleast_1d(cond) > 1e14))
    if bad.size:
        raise ConversionError(f"{what} is singular at frequency index {int(bad[0])}")
    # a @ inv(b) == solve(b^T, a^T)^T
    return np.swapaxes(np.linalg.solve(np.swapaxes(b, -1, -2), np.swapaxes(a, -1, -2)), -1, -2)


def s_to_z(s: np.ndarray, z0: float = Z0_DEFAULT) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    _check_square(s)
    eye = np.eye(s.shape[-1])
    return z0 * _solve_right(eye + s, eye - s, "I - S")


def z_to_s(z: np.ndarray, z0: float = Z0_DEFAULT) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    _check_square(z)
    eye = np.eye(z.shape[-1])
    return _solve_right(z - z0 * eye, z + z0 * eye, "Z + Z0*I")


def y_to_s(y: np.ndarray, z0: float = Z0_DEFAULT) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    _check_square(y)
    eye = np.eye(y.shape[-1])
    return _solve_right(eye - z0 * y, eye + z0 * y, "I + Z0*Y")


def s_to_y(s: np.ndarray, z0: float = Z0_DEFAULT) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    _check_square(s)
    eye = np.eye(s.shape[-1])
    return _solve_right(eye - s, eye + s, "I + S") / z0


def mixed_mode_reduce(s: np.ndarray) -> np.ndarray:
    """Differential-differential block of a (..., 4, 4) S matrix.

    Ports (1, 2) form the differential input and (3, 4) the output; the
    result is referenced to 2*Z0 per differential port.
    """
    s = np.asarray(s, dtype=complex)
    if s.shape[-2:] != (4, 4):
        raise RfNetError(f"mixed-mode reduction needs 4x4 matrices, got {s.shape}")
    return _DIFF_MODE @ s @ _DIFF_MODE.T


def differential_sdd(t: SParamTensor) -> np.ndarray:
    return mixed_mode_reduce(expand_all(t))


@dataclass(frozen=True)
class ComplexPortSpec:
    z01: complex
    z02: complex

    def __post_init__(self):
        if not complex(self.z01).real > 0 or not complex(self.z02).real > 0:
            raise RfNetError(f"port impedances need positive real parts, got {self.z01}, {self.z02}")


def _port_gamma(z: complex, z_ref: float) -> complex:
    return (z - z_ref) / (z + z_ref)


def _loaded_input_gamma(sdd: np.ndarray, gamma_load) -> np.ndarray:
    s11, s12, s21, s22 = sdd[..., 0, 0], sdd[..., 0, 1], sdd[..., 1, 0], sdd[..., 1, 1]
    return s11 + s12 * s21 * gamma_load / (1.0 - s22 * gamma_load)


def gamma_in(sdd: np.ndarray, ports: ComplexPortSpec, z0: float = Z0_DEFAULT) -> np.ndarray:
    """Power-wave input reflection with the Z02 load attached.

    ``sdd`` is (..., 2, 2) referenced to 2*z0.  The reflection is measured
    against the complex source impedance Z01, so it vanishes at conjugate
    match.
    """
    sdd = np.asarray(sdd, dtype=complex)
    z_ref = 2.0 * z0
    z01, z02 = complex(ports.z01), complex(ports.z02)
    g = _loaded_input_gamma(sdd, _port_gamma(z02, z_ref))
    # Z_in = z_ref (1+g)/(1-g); both terms scaled by (1-g) to stay finite near open
    num = z_ref * (1 + g) - z01.conjugate() * (1 - g)
    den = z_ref * (1 + g) + z01 * (1 - g)
    if np.any(np.abs(den) < 1e-3 * abs(z01) * np.abs(1 - g)):
        raise TerminationError("input impedance cancels the source impedance (Z_in + Z01 ~ 0)")
    return num / den


def loss_mag(sdd: np.ndarray, ports: ComplexPortSpec, z0: float = Z0_DEFAULT) -> np.ndarray:
    """Square root of the transducer power gain from the Z01 source to the Z02 load."""
    sdd = np.asarray(sdd, dtype=complex)
    z_ref = 2.0 * z0
    gs = _port_gamma(complex(ports.z01), z_ref)
    gl = _port_gamma(complex(ports.z02), z_ref)
    s11, s12, s21, s22 = sdd[..., 0, 0], sdd[..., 0, 1], sdd[..., 1, 0], sdd[..., 1, 1]
    den = (1 - s11 * gs) * (1 - s22 * gl) - s12 * s21 * gs * gl
    if np.any(np.abs(den) < 1e-12):
        raise TerminationError("source/load terminations make the network singular")
    gain = np.abs(s21) ** 2 * (1 - abs(gs) ** 2) * (1 - abs(gl) ** 2) / np.abs(den) ** 2
    return np.sqrt(gain)


def conjugate_match_impedances(sdd: np.ndarray, z0: float = Z0_DEFAULT) -> tuple[complex, complex]:
    """Source and load impedances giving a simultaneous conjugate match.

    ``sdd`` is one 2x2 matrix referenced to 2*z0.  Requires an
    unconditionally stable (lossy) network.
    """
    s = np.asarray(sdd, dtype=complex)
    s11, s12, s21, s22 = s[0, 0], s[0, 1], s[1, 0], s[1, 1]
    delta = s11 * s22 - s12 * s21
    k = (1 - abs(s11) ** 2 - abs(s22) ** 2 + abs(delta) ** 2) / (2 * abs(s12 * s21))
    if not k > 1:
        raise TerminationError(f"no simultaneous conjugate match: stability factor {k:.6g} <= 1")

    def solve(b, c):
        root = math.sqrt(b * b - 4 * abs(c) ** 2)
        return (b - math.copysign(root, b)) / (2 * c)

    gs = solve(1 + abs(s11) ** 2 - abs(s22) ** 2 - abs(delta) ** 2, s11 - delta * s22.conjugate())
    gl = solve(1 + abs(s22) ** 2 - abs(s11) ** 2 - abs(delta) ** 2, s22 - delta * s11.conjugate())
    z_ref = 2.0 * z0
    return z_ref * (1 + gs) / (1 - gs), z_ref * (1 + gl) / (1 - gl)


def add_shunt_caps(sdd: np.ndarray, freqs_ghz, c1_ff: float, c2_ff: float, z0: float = Z0_DEFAULT) -> np.ndarray:
    """Place capacitors across the differential input and output ports.

    Adding a diagonal admittance D to Y gives, with d = z_ref*D,
    S' = (2S - d(I+S)) (2I + d(I+S))^-1, which needs no Y of the network
    itself (ideal transformers have none).
    """
    sdd = np.asarray(sdd, dtype=complex)
    if c1_ff == 0 and c2_ff == 0:
        return sdd
    z_ref = 2.0 * z0
    omega = 2 * np.pi * np.asarray(freqs_ghz, dtype=float) * 1e9
    d = np.zeros(omega.shape + (2, 2), dtype=complex)
    d[..., 0, 0] = 1j * omega * c1_ff * 1e-15 * z_ref
    d[..., 1, 1] = 1j * omega * c2_ff * 1e-15 * z_ref
    dis = d @ (np.eye(2) + sdd)
    return _solve_right(2 * sdd - dis, 2 * np.eye(2) + dis, "shunt-loaded network")


def differential_input_impedance(t: SParamTensor, z0: float = Z0_DEFAULT) -> np.ndarray:
    """Differential impedance of the primary with the secondary left open."""
    sdd = differential_sdd(t)
    g = _loaded_input_gamma(sdd, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 2.0 * z0 * (1 + g) / (1 - g)


@dataclass(frozen=True)
class SrfResult:
    freq_ghz: float
    found: bool


def detect_srf(t: SParamTensor) -> SrfResult:
    """Lowest frequency where the primary reactance turns from inductive to capacitive."""
    x = differential_input_impedance(t).imag
    f = t.grid.freqs_ghz
    for k in range(len(x) - 1):
        if x[k] > 0 and x[k + 1] <= 0:
            frac = x[k] / (x[k] - x[k + 1])
            return SrfResult(float(f[k] + frac * (f[k + 1] - f[k])), True)
    return SrfResult(t.grid.f_max / 2.0, False)


@dataclass(frozen=True)
class LqResult:
    inductance: float  # henries
    q: float
    physical: bool


def extract_lq(t: SParamTensor, k: int) -> LqResult:
    if not 0 <= k < t.grid.n_points:
        raise IndexError(f"frequency index {k} outside 0..{t.grid.n_points - 1}")
    z = differential_input_impedance(t)[k]
    omega = 2 * np.pi * t.grid.freqs_hz[k]
    inductance = z.imag / omega
    if z.real < -1e-12 * abs(z):
        return LqResult(inductance, z.imag / z.real, False)
    if z.real <= abs(z.imag) / Q_CAP:
        return LqResult(inductance, math.copysign(Q_CAP, z.imag), True)
    return LqResult(inductance, z.imag / z.real, True)


def pack(t: SParamTensor) -> np.ndarray:
    """Channel-major reals: S11re[0..K], S11im[0..K], S12re, ..., S34im."""
    return np.stack([t.data.real, t.data.imag], axis=1).reshape(-1)


def unpack(v, grid: FrequencyGrid) -> SParamTensor:
    v = np.asarray(v, dtype=float)
    if v.shape != (N_REAL_CHANNELS * grid.n_points,):
        raise RfNetError(f"packed vector must have length {N_REAL_CHANNELS * grid.n_points}, got {v.shape}")
    blocks = v.reshape(N_CHANNELS, 2, grid.n_points)
    return SParamTensor(grid, blocks[:, 0] + 1j * blocks[:, 1])


# --- Touchstone v1 ---------------------------------------------------------

_UNITS = {"HZ": 1e-9, "KHZ": 1e-6, "MHZ": 1e-3, "GHZ": 1.0}
OPTION_LINE = "# GHz S RI R 50"


def touchstone_write(t: SParamTensor, path) -> None:
    full = expand_all(t)
    lines = ["! 4-port symmetric transformer network", OPTION_LINE]
    for k, f in enumerate(t.grid.freqs_ghz):
        for row in range(4):
            vals = " ".join(f"{v.real: .15e} {v.imag: .15e}" for v in full[k, row])
            lead = f"{f:.15g}" if row == 0 else ""
            lines.append(f"{lead:<18} {vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_option_line(text: str, lineno: int) -> tuple[float, str]:
    tokens = text[1:].upper().split()
    unit, fmt, ref = "GHZ", "MA", 50.0
    i = 0
    seen_param = False
    while i < len(tokens):
        tok = tokens[i]
        if tok in _UNITS:
            unit = tok
        elif tok in ("RI", "MA", "DB"):
            fmt = tok
        elif tok == "S":
            seen_param = True
        elif tok in ("Y", "Z", "H", "G"):
            raise TouchstoneError(f"only S parameters are supported, option line has {tok}", lineno)
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneError("option line: R without a reference value", lineno)
            try:
                ref = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneError(f"option line: bad reference {tokens[i + 1]!r}", lineno) from None
            i += 1
        else:
            raise TouchstoneError(f"malformed option line: unexpected token {tok!r}", lineno)
        i += 1
    if not seen_param:
        raise TouchstoneError("malformed option line: parameter type missing", lineno)
    if ref != Z0_DEFAULT:
        raise TouchstoneError(f"reference impedance must be {Z0_DEFAULT} ohm, got {ref}", lineno)
    return _UNITS[unit], fmt


def _to_complex(a: float, b: float, fmt: str) -> complex:
    if fmt == "RI":
        return complex(a, b)
    mag = a if fmt == "MA" else 10 ** (a / 20.0)
    return mag * complex(math.cos(math.radians(b)), math.sin(math.radians(b)))


def touchstone_read(path) -> SParamTensor:
    scale, fmt = None, None
    freqs: list[float] = []
    mats: list[np.ndarray] = []
    pending: list[float] = []
    pending_line = 0
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if scale is not None:
                raise TouchstoneError("duplicate option line", lineno)
            scale, fmt = _parse_option_line(line, lineno)
            continue
        if scale is None:
            raise TouchstoneError("data before option line", lineno)
        try:
            values = [float(tok) for tok in line.split()]
        except ValueError:
            raise TouchstoneError(f"non-numeric data {line!r}", lineno) from None
        if not pending:
            pending_line = lineno
            if len(values) != 9:
                raise TouchstoneError(f"truncated row: expected frequency + 8 values, got {len(values)}", lineno)
        elif len(values) != 8:
            raise TouchstoneError(f"truncated row: expected 8 values, got {len(values)}", lineno)
        pending.extend(values)
        if len(pending) == 33:
            f = pending[0] * scale
            if freqs and f <= freqs[-1]:
                raise TouchstoneError(f"non-monotone frequency {pending[0]}", pending_line)
            pairs = np.array(pending[1:]).reshape(16, 2)
            mats.append(np.array([_to_complex(a, b, fmt) for a, b in pairs]).reshape(4, 4))
            freqs.append(f)
            pending = []
    if scale is None:
        raise TouchstoneError("missing option line")
    if pending:
        raise TouchstoneError("truncated frequency block at end of file", pending_line)
    if len(freqs) < 2:
        raise TouchstoneError("need at least two frequency points")
    f = np.array(freqs)
    step = (f[-1] - f[0]) / (len(f) - 1)
    if np.max(np.abs(np.diff(f) - step)) > 1e-6 * step:
        raise TouchstoneError("frequency points are not uniformly spaced")
    grid = FrequencyGrid(float(f[0]), float(step), len(f))
    full = np.array(mats)
    t = SParamTensor.from_full(grid, full)
    mismatch = np.max(np.abs(full - expand_all(t)))
    if mismatch > 1e-6:
        warnings.warn(
            f"{path}: symmetric entries deviate from canonical channels by {mismatch:.3g}; "
            "canonical values kept",
            stacklevel=2,
        )
    return t


def db20(x) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.abs(x), 1e-300))


_COMPLEX_LITERAL = re.compile(r"^\s*([-+]?[0-9.eE+-]+)\s*,\s*([-+]?[0-9.eE+-]+)\s*$")


def parse_complex_pair(text: str) -> complex:
    """Parse impedances written as ``re,im`` (for example ``40,-50``)."""
    m = _COMPLEX_LITERAL.match(text)
    if not m:
        raise RfNetError(f"cannot parse complex value {text!r}; expected the form 're,im', e.g. '40,-50'")
    try:
        return complex(float(m.group(1)), float(m.group(2)))
    except ValueError:
        raise RfNetError(f"cannot parse complex value {text!r}; expected the form 're,im', e.g. '40,-50'") from None
