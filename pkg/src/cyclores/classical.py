"""Classical guiding-centre geometry, the exact quadratic flow and sojourn-time averages."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .fields import FieldProfile, PotentialSpec, TWO_PI, drift_integrals, perp, rotate_vec


@dataclass(frozen=True)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("phase point must be finite")

    @property
    def bracket(self) -> float:
        """``<z> = (1 + q^2 + p^2)^(1/2)``."""
        return math.sqrt(1.0 + float(self.q @ self.q + self.p @ self.p))


@dataclass(frozen=True)
class CyclotronDecomposition:
    center: np.ndarray
    velocity: np.ndarray

    def position(self) -> np.ndarray:
        return self.center + perp(self.velocity)


def decompose(z: PhasePoint) -> CyclotronDecomposition:
    """Guiding centre ``c = q/2 - p_perp`` and velocity ``v = p - q_perp/2``."""
    return CyclotronDecomposition(0.5 * z.q - perp(z.p), z.p - 0.5 * perp(z.q))


def landau_position(t, c, v):
    """Free cyclotron orbit ``c + R(-t) v_perp``."""
    return np.asarray(c) + rotate_vec(-np.asarray(t, dtype=float), perp(v))


def flow_x(profile: FieldProfile, t: float, z: PhasePoint) -> np.ndarray:
    """Position part of the exact flow of ``h_0 = (p - q_perp/2)^2 / 2 - <E(t), q>``."""
    a_c, a_v = drift_integrals(profile, t)
    d = decompose(z)
    return d.center + a_c + rotate_vec(-t, perp(d.velocity) + a_v)


def _landau_step(q, p, dt):
    d = decompose(PhasePoint(q, p))
    vp = rotate_vec(-dt, perp(d.velocity))
    qn = d.center + vp
    vn = -perp(vp)
    return qn, vn + 0.5 * perp(qn)


def integrate_flow_oracle(profile: FieldProfile, potential: Optional[PotentialSpec], t: float,
                          z0: PhasePoint, dt: float, max_steps: int = 10 ** 7, t0: float = 0.0) -> PhasePoint:
    """Strang splitting: exact Landau rotation between half kicks of ``E - grad V``."""
    n = int(round((t - t0) / dt))
    if n < 0 or abs(n * dt - (t - t0)) > 1e-9 * max(1.0, abs(t - t0)):
        raise ValueError("dt must divide the integration interval")
    if n > max_steps:
        raise ValueError(f"{n} steps exceed the limit {max_steps}")
    q, p = z0.q.copy(), z0.p.copy()
    for j in range(n):
        tm = t0 + (j + 0.5) * dt
        f = profile(tm)
        if potential is not None:
            f = f - np.array(potential.grad(tm, q[0], q[1]), dtype=float)
        p = p + 0.5 * dt * f
        q, p = _landau_step(q, p, dt)
        if potential is not None:
            f = profile(tm) - np.array(potential.grad(tm, q[0], q[1]), dtype=float)
        p = p + 0.5 * dt * f
    return PhasePoint(q, p)


def classical_energy(profile: FieldProfile, potential: Optional[PotentialSpec], t: float, z: PhasePoint) -> float:
    v = z.p - 0.5 * perp(z.q)
    e = 0.5 * float(v @ v) - float(profile(t) @ z.q)
    if potential is not None:
        e += float(potential(t, z.q[0], z.q[1]))
    return e


def _closest_times(profile, z, T1, T2, n=512):
    ts = np.linspace(T1, T2, n + 1)
    xs = np.array([flow_x(profile, t, z) for t in ts]) if not profile.is_zero else None
    if xs is None:
        d = decompose(z)
        xs = landau_position(ts, d.center, d.velocity)
    r = np.hypot(xs[:, 0], xs[:, 1])
    i = int(np.argmin(r))
    return [float(ts[i])]


def averaged_symbol(f: Callable, profile: FieldProfile, T1: float, T2: float, z: PhasePoint) -> float:
    """``int_T1^T2 f(t, x(t, z)) dt`` by adaptive quadrature split at the closest approach."""
    if not T1 < T2:
        raise ValueError("need T1 < T2")
    zero = profile.is_zero
    if zero:
        d = decompose(z)

        def g(t):
            return f(t, landau_position(t, d.center, d.velocity))
    else:

        def g(t):
            return f(t, flow_x(profile, t, z))

    pts = [p for p in _closest_times(profile, z, T1, T2) if T1 < p < T2]
    edges = [T1] + sorted(pts) + [T2]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(g, a, b, limit=400, epsabs=1e-11, epsrel=1e-10)
        total += val
    return total


def scan_directions(n: int = 16, seed: int = 0) -> np.ndarray:
    """Unit vectors ``(q1, q2, p1, p2)`` on the 4-sphere.

    The first eight are structural: pure guiding centre (``v = 0``), pure
    velocity (``c = 0``), pure position (``p = 0``) and pure momentum
    (``q = 0``) directions, two each; the orbits of the last two kinds pass
    through the origin. The rest are drawn with a fixed seed.
    """
    dirs = []
    for ang in (0.0, 0.5 * math.pi):
        c = np.array([math.cos(ang), math.sin(ang)])
        # v = 0: p = q_perp / 2 with q = c
        dirs.append(np.concatenate([c, 0.5 * perp(c)]))
    for ang in (0.0, 0.5 * math.pi):
        v = np.array([math.cos(ang), math.sin(ang)])
        # c = 0: q = v_perp, p = v / 2
        dirs.append(np.concatenate([perp(v), 0.5 * v]))
    for ang in (0.0, 0.75 * math.pi):
        dirs.append(np.array([math.cos(ang), math.sin(ang), 0.0, 0.0]))
    for ang in (0.25 * math.pi, 1.0 * math.pi):
        dirs.append(np.array([0.0, 0.0, math.cos(ang), math.sin(ang)]))
    rng = np.random.default_rng(seed)
    while len(dirs) < n:
        dirs.append(rng.normal(size=4))
    d = np.array(dirs[:n], dtype=float)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def sojourn_bound_scan(f: Callable, profile: FieldProfile, radii: Sequence[float], T1: float = 0.0,
                       T2: float = TWO_PI, n_directions: int = 16, seed: int = 0, detail: bool = False):
    """Per radius, the sampled supremum of ``<z> |f_av(z)|`` over phase-space directions."""
    radii = list(radii)
    if any(b <= a for a, b in zip(radii[:-1], radii[1:])):
        raise ValueError("radii must be increasing")
    dirs = scan_directions(n_directions, seed)
    rows = []
    out = []
    for r in radii:
        best = 0.0
        for j, d in enumerate(dirs):
            z = PhasePoint(r * d[:2], r * d[2:])
            val = z.bracket * abs(averaged_symbol(f, profile, T1, T2, z))
            rows.append((float(r), j, val))
            best = max(best, val)
        out.append((float(r), best))
    return (out, rows) if detail else out


def write_scan_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["radius", "direction", "product"])
        for r, j, v in rows:
            w.writerow([f"{r:.17g}", j, f"{v:.17g}"])
