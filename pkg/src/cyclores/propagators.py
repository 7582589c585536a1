"""Exact free propagator, Floquet closed form and the split-step evolver.

The Landau step uses ``H_La = H_ho - L_z / 2`` where ``H_ho`` is the
isotropic oscillator of frequency 1/2 and ``L_z`` the angular momentum;
the two commute, so ``exp(-i t H_La)`` is an oscillator step followed by a
rotation of the function by ``-t/2``. The oscillator step is the exact
chirp / Fourier-multiplier / chirp factorisation of the metaplectic
operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .fields import (
    TWO_PI,
    FieldProfile,
    PotentialSpec,
    drift_integrals,
    field_integrals,
    perp,
    phase_phi,
    resonance_multiple,
    rotate_vec,
)
from .grid import (
    BOUNDARY_GUARD,
    BoundaryError,
    Grid2D,
    WaveFunction,
    apply_phase_translation,
    boundary_mass,
    rotate_array,
)

OMEGA_HO = 0.5
MAX_LANDAU_TIME = 4.0 * math.pi
MAX_STEPS = 10 ** 8


def _oscillator_factors(grid: Grid2D, tau: float):
    """Position chirp and Fourier multiplier with ``C K C = exp(-i tau H_ho)``."""
    w = OMEGA_HO
    alpha = w * math.tan(0.5 * w * tau)
    beta = math.sin(w * tau) / w
    x = grid.x
    k = grid.k
    cx = np.exp(-0.5j * alpha * x * x)
    kk = np.exp(-0.5j * beta * k * k)
    return cx[:, None] * cx[None, :], kk[:, None] * kk[None, :]


def apply_oscillator(a: np.ndarray, grid: Grid2D, tau: float) -> np.ndarray:
    """``exp(-i tau (D^2/2 + q^2/8)) a`` in local coordinates."""
    if tau == 0:
        return a.copy()
    m = max(1, int(math.ceil(abs(OMEGA_HO * tau) / (0.25 * math.pi))))
    chirp, kin = _oscillator_factors(grid, tau / m)
    out = a
    for _ in range(m):
        out = sfft.ifft2(kin * sfft.fft2(chirp * out)) * chirp
    return out


def apply_landau(psi: WaveFunction, t: float) -> WaveFunction:
    """``exp(-i t H_La) psi`` for ``|t| <= 4 pi``."""
    if abs(t) > MAX_LANDAU_TIME:
        raise ValueError(f"|t| = {abs(t):.3f} exceeds 4 pi; compose shorter Landau steps")
    if t == 0:
        return psi.copy()
    grid = psi.grid
    out = apply_oscillator(psi.amplitudes, grid, t)
    out = rotate_array(out, grid, -0.5 * t)
    return WaveFunction(grid, out)


def apply_landau_long(psi: WaveFunction, t: float) -> WaveFunction:
    """``exp(-i t H_La)`` for any t using ``exp(-2 pi i H_La) = -1``."""
    k = int(math.floor(t / TWO_PI + 0.5))
    rest = t - k * TWO_PI
    out = apply_landau(psi, rest)
    if k % 2:
        out.amplitudes *= -1.0
    return out


def s_operator_data(profile: FieldProfile, t: float, t0: float):
    """Plane-wave vector, translation vector and phase realising S(t, t0)."""
    A, B = field_integrals(profile, t0, t)
    a = 0.5 * (A + B)
    b = perp(A - B)
    theta = -phase_phi(profile, t, t0) + 0.5 * float(a @ b)
    return a, b, theta


def apply_S(psi: WaveFunction, profile: FieldProfile, t: float, t0: float = 0.0) -> WaveFunction:
    """``exp(i<int E, c>) exp(i<int RE, v_perp>) exp(-i phi(t, t0)) psi``."""
    if t == t0 or profile.is_zero:
        return psi.copy()
    a, b, theta = s_operator_data(profile, t, t0)
    return apply_phase_translation(psi, a, b, theta)


def apply_free(psi: WaveFunction, profile: FieldProfile, t: float, t0: float = 0.0) -> WaveFunction:
    """Closed-form free propagator ``U0(t, t0) = e^{-itH_La} S(t, t0) e^{i t0 H_La}``."""
    out = apply_landau_long(psi, -t0) if t0 else psi.copy()
    out = apply_S(out, profile, t, t0)
    return apply_landau_long(out, t)


def free_centroid_shift(profile: FieldProfile, t: float):
    """Classical trajectory of the phase-space origin, ``a_c(t) + R(-t) a_v(t)``."""
    a_c, a_v = drift_integrals(profile, t)
    return a_c + rotate_vec(-t, a_v)


def floquet_closed_form(profile: FieldProfile, n: int):
    """``(alpha_n, a_c(T), a_v(T))`` for ``T = 2 pi n``."""
    T = profile.period
    if resonance_multiple(T) != n:
        raise ValueError(f"T={T} is not 2pi * {n}")
    a_c, a_v = drift_integrals(profile, T)
    alpha = -math.pi * n - phase_phi(profile, T, 0.0)
    return alpha, a_c, a_v


def apply_floquet_closed_form(psi: WaveFunction, profile: FieldProfile) -> WaveFunction:
    """Assemble ``exp(i alpha_n) exp(i<int E, c>) exp(i<int RE, v_perp>)`` as one translation."""
    n = resonance_multiple(profile.period)
    alpha, _, _ = floquet_closed_form(profile, n)
    A, B = field_integrals(profile, 0.0, profile.period)
    a = 0.5 * (A + B)
    b = perp(A - B)
    return apply_phase_translation(psi, a, b, alpha + 0.5 * float(a @ b))


# --------------------------------------------------------------------------
# split-step evolution


@dataclass(frozen=True)
class PropagatorPlan:
    profile: FieldProfile
    potential: Optional[PotentialSpec]
    grid: Grid2D
    steps_per_period: int = 256
    frame: str = "lab"
    boundary_guard: float = BOUNDARY_GUARD

    def __post_init__(self):
        if self.steps_per_period < 64:
            raise ValueError("steps_per_period must be >= 64 (dt <= T/64)")
        if self.steps_per_period % 2:
            raise ValueError("steps_per_period must be even")
        if self.frame not in ("lab", "comoving"):
            raise ValueError(f"unknown frame {self.frame!r}")

    @property
    def dt(self) -> float:
        return self.profile.period / self.steps_per_period

    @property
    def period(self) -> float:
        return self.profile.period


def potential_energy(plan: PropagatorPlan, t: float, x, y, include_field: bool = True):
    """``W(t, q) = -<E(t), q> + V(t, q)`` at local coordinates ``(x, y)``."""
    c = plan.grid.center_vec
    w = 0.0
    if include_field and not plan.profile.is_zero:
        e = plan.profile(t)
        w = -(e[0] * (x + c[0]) + e[1] * (y + c[1]))
    if plan.potential is not None:
        w = w + plan.potential(t, x + c[0], y + c[1])
    return w


def strang_step(psi: WaveFunction, plan: PropagatorPlan, t: float, dt: Optional[float] = None,
                check_boundary: bool = True) -> WaveFunction:
    """One lab-frame step ``e^{-i dt W/2} e^{-i dt H_La} e^{-i dt W/2}``, W at ``t + dt/2``."""
    dt = plan.dt if dt is None else dt
    x, y = plan.grid.mesh()
    half = np.exp(-0.5j * dt * potential_energy(plan, t + 0.5 * dt, x, y))
    out = WaveFunction(psi.grid, psi.amplitudes * half)
    out = apply_landau(out, dt)
    out.amplitudes *= half
    if check_boundary:
        m = out.boundary_mass()
        if m > plan.boundary_guard:
            raise BoundaryError(f"boundary mass {m:.3e} exceeds guard at t={t + dt:.4f}", m)
    return out


class SplitStepEvolver:
    """Strang evolution carried out in the frame co-rotating with angle ``t/2``.

    With ``phi(t)(q) = psi(t)(R(-t/2) q)`` each lab step becomes
    ``e^{-i dt W_{t+dt}/2} e^{-i dt H_ho} e^{-i dt W_t/2}``, where
    ``W_s(q) = W(R(-s/2) q)``; this is the same operator as the lab step but
    needs no per-step image rotation. Adjacent position multipliers
    (potential halves and oscillator chirps) are fused, so a step costs one
    FFT pair.

    In the comoving frame the state is additionally displaced along the
    classical trajectory of the origin ``xi(t)``; the drive then disappears
    and V is sampled at ``q + xi(t)``.
    """

    def __init__(self, plan: PropagatorPlan, psi0: WaveFunction, t0: float = 0.0):
        if psi0.grid != plan.grid:
            raise ValueError("initial state lives on a different grid than the plan")
        self.plan = plan
        self.grid = plan.grid
        self.t = float(t0)
        self._t_origin = float(t0)
        self.comoving = plan.frame == "comoving"
        dt = plan.dt
        self._x, self._y = self.grid.mesh()
        self._chirp, self._kin = _oscillator_factors(self.grid, dt)
        self._static_v = None
        pot = plan.potential
        if pot is not None and pot.static and pot.radial and not np.any(self.grid.center_vec) and (
            not self.comoving or plan.profile.is_zero
        ):
            self._static_v = pot(0.0, self._x, self._y)
        if self.comoving:
            psi0 = self._to_comoving(psi0, self.t)
        phi = rotate_array(psi0.amplitudes, self.grid, 0.5 * self.t) if self.t else psi0.amplitudes.copy()
        self.phi = phi
        self._steps_done = 0

    # -- frame handling -----------------------------------------------------

    def _displacement_ops(self, t):
        """Weyl data of ``exp(-itH) S(t, 0) exp(itH)``."""
        return s_operator_data(self.plan.profile, t, 0.0)

    def _to_comoving(self, psi, t):
        if t == 0:
            return psi.copy()
        out = apply_landau_long(psi, -t)
        a, b, theta = self._displacement_ops(t)
        out = apply_phase_translation(out, -a, -b, -theta + float(a @ b))
        return apply_landau_long(out, t)

    def _from_comoving(self, chi, t):
        if t == 0:
            return chi
        out = apply_landau_long(chi, -t)
        out = apply_S(out, self.plan.profile, t, 0.0)
        return apply_landau_long(out, t)

    def _xi(self, t):
        return free_centroid_shift(self.plan.profile, t)

    # -- multipliers ----------------------------------------------------------

    def _phase(self, tm: float, angle: float):
        """``W(tm, R(-angle/2) q)`` as an array (or scalar/vector parts)."""
        plan = self.plan
        th = 0.5 * angle
        c = self.grid.center_vec
        lin = np.zeros(2)
        const = 0.0
        field = None
        if not self.comoving and not plan.profile.is_zero:
            e = plan.profile(tm)
            lin = -rotate_vec(th, e)
            const = -float(e @ c)
        pot = plan.potential
        if pot is not None:
            if self._static_v is not None:
                field = self._static_v
            else:
                shift = c + (self._xi(tm) if self.comoving else 0.0)
                cs, sn = math.cos(th), math.sin(th)
                X = cs * self._x + sn * self._y + shift[0]
                Y = -sn * self._x + cs * self._y + shift[1]
                field = pot(tm, X, Y)
        return lin, const, field

    def _multiplier(self, parts, weights):
        """``prod_j exp(-i w_j W_j)`` given the parts of each W."""
        lin = np.zeros(2)
        const = 0.0
        fields = []
        for (l, c, f), w in zip(parts, weights):
            lin = lin + w * l
            const += w * c
            if f is not None:
                fields.append((w, f))
        m = None
        if fields:
            if all(f is fields[0][1] for _, f in fields):
                tot = sum(w for w, _ in fields) * fields[0][1]
            else:
                tot = sum(w * f for w, f in fields)
            m = np.exp(-1j * tot)
        ex = np.exp(-1j * (lin[0] * self.grid.x + const))
        ey = np.exp(-1j * lin[1] * self.grid.x)
        sep = ex[:, None] * ey[None, :]
        return sep if m is None else sep * m

    # -- stepping -------------------------------------------------------------

    def advance(self, n_steps: int) -> None:
        if n_steps <= 0:
            return
        if n_steps > MAX_STEPS:
            raise ValueError("step count overflow")
        dt = self.plan.dt
        k0 = self._steps_done
        t0 = self._t_origin
        h = 0.5 * dt
        t = t0 + k0 * dt
        phi = self.phi
        phi *= self._chirp * self._multiplier([self._phase(t + h, t)], [h])
        for j in range(n_steps):
            phi = sfft.ifft2(self._kin * sfft.fft2(phi))
            tn = t0 + (k0 + j + 1) * dt
            if j < n_steps - 1:
                m = self._multiplier([self._phase(t + h, tn), self._phase(tn + h, tn)], [h, h])
                phi *= self._chirp * self._chirp * m
            else:
                phi *= self._chirp * self._multiplier([self._phase(t + h, tn)], [h])
            t = tn
        self.phi = phi
        self._steps_done += n_steps
        self.t = t

    def advance_to(self, t_target: float) -> None:
        n = int(round((t_target - self.t) / self.plan.dt))
        if n < 0 or abs(self.t + n * self.plan.dt - t_target) > 1e-9 * max(1.0, abs(t_target)):
            raise ValueError("target time is not on the step lattice")
        self.advance(n)

    def frame_state(self) -> WaveFunction:
        """The evolved state in the propagation frame (lab or comoving), unrotated."""
        return WaveFunction(self.grid, rotate_array(self.phi, self.grid, -0.5 * self.t))

    def state(self) -> WaveFunction:
        """Lab-frame state at the current time."""
        chi = self.frame_state()
        if self.comoving:
            return self._from_comoving(chi, self.t)
        return chi

    def boundary_mass(self) -> float:
        return boundary_mass(self.phi, self.grid.h)

    def check_boundary(self, period_index=None) -> float:
        m = self.boundary_mass()
        if m > self.plan.boundary_guard:
            raise BoundaryError(
                f"boundary mass {m:.3e} exceeds guard {self.plan.boundary_guard:.1e}"
                + ("" if period_index is None else f" in period {period_index}"),
                m,
                period_index,
            )
        return m


def evolve(plan: PropagatorPlan, psi: WaveFunction, t1: float, t0: float = 0.0) -> WaveFunction:
    ev = SplitStepEvolver(plan, psi, t0)
    ev.advance_to(t1)
    ev.check_boundary()
    return ev.state()


def floquet_map(plan: PropagatorPlan, psi: WaveFunction) -> WaveFunction:
    """One period of the stepped propagator, ``U(T, 0) psi``."""
    return evolve(plan, psi, plan.period, 0.0)
