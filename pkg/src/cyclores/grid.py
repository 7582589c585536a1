"""Wave functions on a square periodic grid.

A grid may be centred away from the physical origin. The local coordinates
``q' = q - center`` are related to the physical ones by a magnetic
translation, which commutes with the Landau Hamiltonian; physical
operators act as ``q = q' + center`` and ``D = D' + perp(center) / 2``.
This lets a packet far from the impurity live on a small grid.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .fields import perp

# Fraction of |psi|^2 allowed on the outer frame before a run is aborted.
BOUNDARY_GUARD = 1e-6
FRAME_CELLS = 4
MOMENTUM_SAFETY = 1.5

DUMP_MAGIC = b"CYRS"
DUMP_HEADER = struct.Struct("<4sIddd")  # magic, n, L, center_x, center_y -> 32 bytes


class BoundaryError(RuntimeError):
    """Raised when probability reaches the periodic seam of the grid."""

    def __init__(self, message, mass=None, period_index=None):
        super().__init__(message)
        self.mass = mass
        self.period_index = period_index


@dataclass(frozen=True)
class Grid2D:
    n: int
    extent: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")
        if not self.extent > 0:
            raise ValueError("grid extent must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def h(self) -> float:
        return self.extent / self.n

    @property
    def x(self) -> np.ndarray:
        """Local node coordinates along one axis, ``[-L/2, L/2)``."""
        return -0.5 * self.extent + self.h * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * math.pi * sfft.fftfreq(self.n, d=self.h)

    @property
    def nyquist(self) -> float:
        return math.pi * self.n / self.extent

    @property
    def center_vec(self) -> np.ndarray:
        return np.asarray(self.center)

    def mesh(self):
        """Local ``(x, y)`` arrays; axis 0 is x, axis 1 is y."""
        x = self.x
        return x[:, None], x[None, :]

    def check_momentum_budget(self, p_max: float) -> None:
        if self.nyquist < MOMENTUM_SAFETY * p_max:
            raise ValueError(
                f"grid n={self.n}, L={self.extent} resolves |p| <= {self.nyquist:.2f}, "
                f"below {MOMENTUM_SAFETY} x budget {p_max:.2f}"
            )

    def check_position_budget(self, q_local_max: float, margin: float) -> None:
        if q_local_max + margin > 0.5 * self.extent:
            raise ValueError(
                f"expected excursion {q_local_max:.2f} + margin {margin:.2f} exceeds half extent {0.5 * self.extent}"
            )


@dataclass
class WaveFunction:
    grid: Grid2D
    amplitudes: np.ndarray

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes.copy())

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.amplitudes) ** 2)) * self.grid.h ** 2)

    def boundary_mass(self) -> float:
        return boundary_mass(self.amplitudes, self.grid.h)

    def with_amplitudes(self, a) -> "WaveFunction":
        return WaveFunction(self.grid, a)


def boundary_mass(a: np.ndarray, h: float, cells: int = FRAME_CELLS) -> float:
    p = np.abs(a) ** 2
    edge = p[:cells].sum() + p[-cells:].sum() + p[cells:-cells, :cells].sum() + p[cells:-cells, -cells:].sum()
    return float(edge * h * h)


def make_gaussian(grid: Grid2D, q0, p0=(0.0, 0.0), sigma: float = 1.0, guard: float = BOUNDARY_GUARD) -> WaveFunction:
    """Normalized ``exp(-|q - q0|^2 / 4 sigma^2 + i <p0, q>)``.

    ``q0`` and ``p0`` are physical; the packet has ``<q> = q0``, ``<D> = p0``
    and ``<v> = p0 - perp(q0) / 2``.
    """
    q0 = np.asarray(q0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    ql = q0 - grid.center_vec
    pl = p0 - 0.5 * perp(grid.center_vec)
    if np.max(np.abs(ql)) + 6.0 * sigma > 0.5 * grid.extent:
        raise ValueError(f"packet at {tuple(q0)} with sigma={sigma} violates the 6-sigma margin of the grid")
    if np.max(np.abs(pl)) + 3.0 * 0.5 / sigma > grid.nyquist:
        raise ValueError(f"packet momentum {tuple(p0)} aliases on this grid (Nyquist {grid.nyquist:.3g})")
    x, y = grid.mesh()
    a = np.exp(-((x - ql[0]) ** 2 + (y - ql[1]) ** 2) / (4.0 * sigma ** 2) + 1j * (pl[0] * x + pl[1] * y))
    a /= math.sqrt(float(np.sum(np.abs(a) ** 2))) * grid.h
    psi = WaveFunction(grid, a)
    if psi.boundary_mass() > guard:
        raise ValueError("packet has too much weight on the grid frame")
    return psi


def landau_coherent_state(grid: Grid2D, center, velocity=(0.0, 0.0), sigma: float = 1.0) -> WaveFunction:
    """Gaussian with prescribed guiding centre and velocity expectations."""
    c = np.asarray(center, dtype=float)
    v = np.asarray(velocity, dtype=float)
    q0 = c + perp(v)
    p0 = v + 0.5 * perp(q0)
    return make_gaussian(grid, q0, p0, sigma)


def inner(psi: WaveFunction, phi: WaveFunction) -> complex:
    """``h^2 sum conj(psi) phi``."""
    if psi.grid != phi.grid:
        raise ValueError("inner product of states on different grids")
    return complex(np.vdot(psi.amplitudes, phi.amplitudes)) * psi.grid.h ** 2


def translate_array(a: np.ndarray, grid: Grid2D, b) -> np.ndarray:
    """``a(q + b)`` through a Fourier phase (exact on the torus)."""
    k = grid.k
    fa = sfft.fft2(a)
    fa *= np.exp(1j * b[0] * k)[:, None]
    fa *= np.exp(1j * b[1] * k)[None, :]
    return sfft.ifft2(fa)


def apply_phase_translation(psi: WaveFunction, a, b, theta: float = 0.0) -> WaveFunction:
    """``exp(i theta) exp(i <a, q>) exp(i <b, D>) psi`` with physical q and D.

    ``(exp(i <b, D>) psi)(q) = psi(q + b)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    grid = psi.grid
    c = grid.center_vec
    theta = theta + float(a @ c) + 0.5 * float(b @ perp(c))
    out = psi.amplitudes
    if np.any(b):
        out = translate_array(out, grid, b)
    else:
        out = out.copy()
    if np.any(a):
        x, y = grid.mesh()
        out *= np.exp(1j * a[0] * x)
        out *= np.exp(1j * a[1] * y)
    if theta:
        out *= np.exp(1j * theta)
    return WaveFunction(grid, out)


def _shear(a: np.ndarray, x: np.ndarray, k: np.ndarray, s: float, axis: int) -> np.ndarray:
    """``f(x + s y, y)`` for axis 0, ``f(x, y + s x)`` for axis 1."""
    fa = sfft.fft(a, axis=axis)
    if axis == 0:
        fa *= np.exp(1j * s * np.outer(k, x))
    else:
        fa *= np.exp(1j * s * np.outer(x, k))
    return sfft.ifft(fa, axis=axis)


def quarter_turns(a: np.ndarray, m: int) -> np.ndarray:
    """``f o R(-m pi/2)`` on the grid, exact index permutation."""
    m %= 4
    for _ in range(m):
        # g(x, y) = f(y, -x)
        a = np.roll(a[:, ::-1], 1, axis=1).T
    return np.ascontiguousarray(a)


def rotate_array(a: np.ndarray, grid: Grid2D, theta: float) -> np.ndarray:
    """``(Rot_theta f)(q) = f(R(-theta) q)`` about the grid centre.

    Multiples of pi/2 are exact permutations; the remainder (``|r| <= pi/4``)
    uses three Fourier shears, each unitary on the torus.
    """
    m = int(round(theta / (0.5 * math.pi)))
    r = theta - m * 0.5 * math.pi
    out = quarter_turns(a, m) if m % 4 else a
    if abs(r) < 1e-15:
        return out.copy() if out is a else out
    x, k = grid.x, grid.k
    ta = math.tan(0.5 * r)
    out = _shear(out, x, k, ta, 0)
    out = _shear(out, x, k, -math.sin(r), 1)
    out = _shear(out, x, k, ta, 0)
    return out


def parseval_norms(psi: WaveFunction):
    """Position- and momentum-space norms."""
    a = psi.amplitudes
    n = psi.grid.n
    pos = math.sqrt(float(np.sum(np.abs(a) ** 2))) * psi.grid.h
    mom = math.sqrt(float(np.sum(np.abs(sfft.fft2(a)) ** 2)) / (n * n)) * psi.grid.h
    return pos, mom


def dump_state(psi: WaveFunction, path) -> None:
    """Binary dump: 32-byte header then interleaved float64 re/im, row-major (x major)."""
    g = psi.grid
    header = DUMP_HEADER.pack(DUMP_MAGIC, g.n, g.extent, g.center[0], g.center[1])
    body = np.ascontiguousarray(psi.amplitudes, dtype="<c16").view("<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())


def load_state(path) -> WaveFunction:
    raw = Path(path).read_bytes()
    if len(raw) < DUMP_HEADER.size:
        raise ValueError("state dump truncated")
    magic, n, L, cx, cy = DUMP_HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = np.frombuffer(raw, dtype="<f8", offset=DUMP_HEADER.size)
    if body.size != 2 * n * n:
        raise ValueError("state dump size does not match header")
    a = body.view("<c16").reshape(n, n).astype(np.complex128)
    return WaveFunction(Grid2D(n, L, (cx, cy)), a)
