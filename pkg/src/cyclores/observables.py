"""Expectation values, stroboscopic trajectories and long-time estimators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.fft as sfft

from .fields import ResonanceClass, classify_resonance, drift_integrals, perp, rotate_vec
from .grid import WaveFunction, apply_phase_translation, inner
from .propagators import (
    PropagatorPlan,
    SplitStepEvolver,
    apply_free,
    apply_landau_long,
    evolve,
    s_operator_data,
)

CSV_COLUMNS = (
    "t", "qx", "qy", "vx", "vy", "cx", "cy", "kinetic", "norm", "boundary_mass", "autocorr_re", "autocorr_im",
)
NORM_DRIFT_LIMIT = 1e-9
CESARO_LOW = 0.01
CESARO_HIGH = 0.2
TREND_TOLERANCE = 0.1


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    mean_q: np.ndarray
    mean_v: np.ndarray
    mean_c: np.ndarray
    kinetic: float
    norm: float
    boundary_mass: float
    autocorr: complex

    def row(self):
        return (
            self.t, self.mean_q[0], self.mean_q[1], self.mean_v[0], self.mean_v[1], self.mean_c[0],
            self.mean_c[1], self.kinetic, self.norm, self.boundary_mass, self.autocorr.real, self.autocorr.imag,
        )


@dataclass
class Trajectory:
    """Observables sampled at ``t0 + n T`` (plus optional intra-period samples)."""

    scenario: str
    period: float
    records: List[ObservableRecord] = field(default_factory=list)
    samples_per_period: int = 1

    def append(self, rec: ObservableRecord) -> None:
        if self.records and not rec.t > self.records[-1].t:
            raise ValueError("trajectory times must increase")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def stroboscopic(self) -> "Trajectory":
        """Only the records at whole periods."""
        if self.samples_per_period == 1:
            return self
        recs = self.records[:: self.samples_per_period]
        return Trajectory(self.scenario, self.period, list(recs), 1)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def column(self, name: str) -> np.ndarray:
        """A record attribute (``mean_q``, ``autocorr``, ...) or a CSV column (``qx``, ``autocorr_re``, ...)."""
        if name in CSV_COLUMNS and not hasattr(ObservableRecord, name):
            return self.as_array()[:, CSV_COLUMNS.index(name)]
        return np.array([getattr(r, name) for r in self.records])

    def as_array(self) -> np.ndarray:
        return np.array([r.row() for r in self.records], dtype=float).reshape(-1, len(CSV_COLUMNS))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow([repr(float(x)) for x in r.row()])


@dataclass(frozen=True)
class MourreReport:
    tag: str
    predicted: float
    measured: float
    radius: float

    def __post_init__(self):
        if self.predicted < 0:
            raise ValueError("predicted Mourre constant must be non-negative")

    @property
    def deviation(self) -> float:
        return abs(self.measured - self.predicted)


# --------------------------------------------------------------------------
# expectations


def _derivatives(psi: WaveFunction):
    """``D_x psi`` and ``D_y psi`` in local coordinates, ``D = -i grad``."""
    k = psi.grid.k
    f = sfft.fft2(psi.amplitudes)
    dx = sfft.ifft2(f * k[:, None])
    dy = sfft.ifft2(f * k[None, :])
    return dx, dy


def expectations(psi: WaveFunction) -> dict:
    """``<q>``, ``<v>``, ``<c>``, ``<H_La>`` and the norm, in physical coordinates.

    ``v`` is invariant under the grid's magnetic translation; ``c`` and ``q``
    are shifted by the grid centre.
    """
    g = psi.grid
    a = psi.amplitudes
    h2 = g.h ** 2
    x, y = g.mesh()
    dens = np.abs(a) ** 2
    norm2 = float(dens.sum()) * h2
    qx = float((dens * x).sum()) * h2 / norm2
    qy = float((dens * y).sum()) * h2 / norm2
    dx, dy = _derivatives(psi)
    Dx = float(np.real(np.vdot(a, dx))) * h2 / norm2
    Dy = float(np.real(np.vdot(a, dy))) * h2 / norm2
    # v = D - q_perp / 2 = (D_x + y/2, D_y - x/2)
    v1 = dx + 0.5 * y * a
    v2 = dy - 0.5 * x * a
    kinetic = 0.5 * float(np.sum(np.abs(v1) ** 2 + np.abs(v2) ** 2)) * h2 / norm2
    q_loc = np.array([qx, qy])
    D_loc = np.array([Dx, Dy])
    mean_v = D_loc - 0.5 * perp(q_loc)
    mean_c = 0.5 * q_loc - perp(D_loc)
    center = g.center_vec
    return {
        "mean_q": q_loc + center,
        "mean_v": mean_v,
        "mean_c": mean_c + center,
        "kinetic": kinetic,
        "norm": math.sqrt(norm2),
    }


def record_from_state(t: float, psi: WaveFunction, psi0: Optional[WaveFunction] = None) -> ObservableRecord:
    e = expectations(psi)
    ac = inner(psi0, psi) if psi0 is not None else complex("nan")
    return ObservableRecord(t, e["mean_q"], e["mean_v"], e["mean_c"], e["kinetic"], e["norm"],
                            psi.boundary_mass(), ac)


def _weyl_overlap(f: WaveFunction, g: WaveFunction, a, b, theta) -> complex:
    """``<f, e^{i theta} e^{i<a,q>} e^{i<b,D>} g>`` when the displacement fits the grid, else 0."""
    grid = g.grid
    if np.max(np.abs(b)) >= 0.5 * grid.extent or np.max(np.abs(a)) >= grid.nyquist:
        return 0j
    return inner(f, apply_phase_translation(g, a, b, theta))


def comoving_record(ev: SplitStepEvolver, psi0: Optional[WaveFunction]) -> ObservableRecord:
    """Lab observables of a comoving-frame evolution without leaving the grid.

    The frame map is ``M_t = e^{-itH} S(t, 0) e^{itH}``; it shifts ``c`` by
    ``a_c(t)``, ``v_perp`` by ``R(-t) a_v(t)`` and ``q`` by their sum.
    """
    t = ev.t
    chi = ev.frame_state()
    e = expectations(chi)
    a_c, a_v = drift_integrals(ev.plan.profile, t)
    dvp = rotate_vec(-t, a_v)
    dv = -perp(dvp)
    mean_v = e["mean_v"] + dv
    kinetic = e["kinetic"] + float(e["mean_v"] @ dv) + 0.5 * float(dv @ dv)
    ac = complex("nan")
    if psi0 is not None:
        a, b, theta = s_operator_data(ev.plan.profile, t, 0.0)
        # <psi0, M_t chi> = <e^{itH} psi0, S e^{itH} chi>
        ac = _weyl_overlap(apply_landau_long(psi0, -t), apply_landau_long(chi, -t), a, b, theta)
    return ObservableRecord(t, e["mean_q"] + a_c + dvp, mean_v, e["mean_c"] + a_c, kinetic, e["norm"],
                            chi.boundary_mass(), ac)


def evolve_stroboscopic(plan: PropagatorPlan, psi0: WaveFunction, n_periods: int, scenario: str = "",
                        samples_per_period: int = 1, callback: Optional[Callable] = None) -> Trajectory:
    """Run ``n_periods`` of the stepped propagator and record observables.

    Raises :class:`BoundaryError` (with the period index) when probability
    reaches the grid frame, and ``RuntimeError`` on norm drift above 1e-9.
    """
    if n_periods < 0:
        raise ValueError("n_periods must be non-negative")
    if samples_per_period < 1 or plan.steps_per_period % samples_per_period:
        raise ValueError("samples_per_period must divide steps_per_period")
    ev = SplitStepEvolver(plan, psi0)
    comoving = plan.frame == "comoving"

    def snap():
        return comoving_record(ev, psi0) if comoving else record_from_state(ev.t, ev.state(), psi0)

    traj = Trajectory(scenario, plan.period, samples_per_period=samples_per_period)
    traj.append(snap())
    n0 = traj.records[0].norm
    chunk = plan.steps_per_period // samples_per_period
    for n in range(1, n_periods + 1):
        for _ in range(samples_per_period):
            ev.advance(chunk)
            ev.check_boundary(n)
            traj.append(snap())
        drift = abs(traj.records[-1].norm - n0)
        if drift > NORM_DRIFT_LIMIT:
            raise RuntimeError(f"norm drift {drift:.2e} in period {n}")
        if callback is not None:
            callback(n, traj.records[-1])
    return traj


# --------------------------------------------------------------------------
# Mourre differences


def mourre_vector(profile, tag: str) -> np.ndarray:
    a_c, a_v = drift_integrals(profile, profile.period)
    if tag == "A_c":
        return a_c
    if tag == "A_v":
        return a_v
    raise ValueError(f"unknown Mourre operator {tag!r}; use A_c or A_v")


def _mourre_observable(psi: WaveFunction, tag: str, vec) -> float:
    e = expectations(psi)
    if tag == "A_c":
        return float(vec @ e["mean_c"])
    return float(vec @ perp(e["mean_v"]))


def mourre_expectation(plan: PropagatorPlan, psi: WaveFunction, tag: str, engine: str = "auto") -> MourreReport:
    """``<U(T) psi, A U(T) psi> - <psi, A psi>`` for ``A = <a_c(T), c>`` or ``<a_v(T), v_perp>``.

    ``engine`` selects the one-period propagator: ``closed`` (exact free
    form, only without potential), ``stepped`` or ``auto``.
    """
    vec = mourre_vector(plan.profile, tag)
    if float(vec @ vec) < 1e-24:
        raise ValueError(f"{tag}: displacement a(T) vanishes, the operator is trivial")
    if engine == "auto":
        engine = "closed" if plan.potential is None else "stepped"
    if engine == "closed":
        if plan.potential is not None:
            raise ValueError("closed-form engine requires V = 0")
        out = apply_free(psi, plan.profile, plan.period, 0.0)
    elif engine == "stepped":
        out = evolve(plan, psi, plan.period, 0.0)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    measured = _mourre_observable(out, tag, vec) - _mourre_observable(psi, tag, vec)
    radius = float(np.linalg.norm(expectations(psi)["mean_q"]))
    return MourreReport(tag, float(vec @ vec), measured, radius)


# --------------------------------------------------------------------------
# long-time estimators


def autocorrelation_series(traj: Trajectory) -> np.ndarray:
    return traj.stroboscopic().column("autocorr").astype(complex)


def cesaro_means(series) -> np.ndarray:
    """``M_N = (1/N) sum_{1<=n<=N} |a_n|^2`` for every N; the trivial ``a_0 = 1`` is left out."""
    p = np.abs(np.asarray(series, dtype=complex)[1:]) ** 2
    return np.cumsum(p) / np.arange(1, p.size + 1)


def spectral_classify(series, threshold_low: float = CESARO_LOW, threshold_high: float = CESARO_HIGH,
                      trend_tol: float = TREND_TOLERANCE) -> str:
    """``ac_like`` / ``pp_like`` / ``mixed`` from the Cesàro mean of ``|<psi0, U(nT) psi0>|^2``.

    The trend compares ``M_N`` with ``M_{N/2}``; ``trend_tol`` allows a
    relative dip for quasi-periodic returns.
    """
    series = np.asarray(series, dtype=complex)
    if series.size < 16:
        raise ValueError("need at least 16 autocorrelation samples")
    m = cesaro_means(series)
    final, half = m[-1], m[m.size // 2 - 1]
    if final < threshold_low and final < half:
        return "ac_like"
    if final > threshold_high and final >= (1.0 - trend_tol) * half:
        return "pp_like"
    return "mixed"


@dataclass(frozen=True)
class VelocityEstimate:
    velocity: np.ndarray
    uncertainty: float
    samples: int

    def relative_error(self, reference) -> float:
        reference = np.asarray(reference, dtype=float)
        return float(np.linalg.norm(self.velocity - reference) / np.linalg.norm(reference))


def _second_half(traj: Trajectory):
    recs = traj.stroboscopic().records
    if len(recs) < 8:
        raise ValueError(f"need at least 8 stroboscopic samples, got {len(recs)}")
    return recs[(len(recs) - 1) // 2:]


def asymptotic_velocity_estimate(traj: Trajectory) -> VelocityEstimate:
    """Least-squares slope of ``<q>(nT)`` over the second half of the run."""
    recs = _second_half(traj)
    t = np.array([r.t for r in recs])
    q = np.array([r.mean_q for r in recs])
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, q, rcond=None)
    resid = q - A @ coef
    m = len(t)
    sxx = float(np.sum((t - t.mean()) ** 2))
    unc = math.sqrt(float(np.sum(resid ** 2)) / max(m - 2, 1) / sxx) if sxx > 0 else float("inf")
    return VelocityEstimate(coef[0], unc, m)


@dataclass(frozen=True)
class GrowthFit:
    rho_hat: float
    rho_pred: Optional[float]
    resonant: bool

    @property
    def relative_deviation(self) -> Optional[float]:
        if self.rho_pred is None or self.rho_pred == 0:
            return None
        return abs(self.rho_hat - self.rho_pred) / self.rho_pred


def energy_growth_fit(traj: Trajectory, rho_pred: Optional[float] = None) -> GrowthFit:
    """Coefficient of ``(nT)^2`` in a quadratic fit of ``<H_La>(nT)`` over the second half."""
    recs = _second_half(traj)
    t = np.array([r.t for r in recs])
    k = np.array([r.kinetic for r in recs])
    coef = np.polyfit(t, k, 2)
    resonant = classify_resonance(traj.period) is ResonanceClass.RESONANT
    return GrowthFit(float(coef[0]), rho_pred, resonant)


def virial_check(traj: Trajectory) -> float:
    """``|v_asy|`` estimate; vanishes for bound states."""
    return float(np.linalg.norm(asymptotic_velocity_estimate(traj).velocity))


def kinetic_band(traj: Trajectory) -> float:
    """``(max - min) / mean`` of the stroboscopic kinetic energy."""
    k = traj.stroboscopic().column("kinetic")
    return float((k.max() - k.min()) / k.mean())
