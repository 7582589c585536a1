"""Periodic electric drive, impurity potentials and the drift data derived from them.

Conventions used throughout the package:

* ``perp(a) = (-a[1], a[0])``; with this choice the velocity operator
  ``v = D - q_perp / 2`` satisfies ``[v1, v2] = i``.
* ``rot(t)`` is the counter-clockwise rotation matrix of angle ``t``.
* Time is measured in inverse cyclotron frequencies, so the free cyclotron
  period is ``2 pi``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * math.pi

# Gauss-Legendre nodes per period-length segment.
GL_NODES = 64
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)

RESONANCE_TOL = 1e-12
RESONANCE_MAX_DENOMINATOR = 64


def perp(a):
    """Direct perpendicular ``(-a2, a1)``; works on ``(..., 2)`` arrays."""
    a = np.asarray(a, dtype=float)
    return np.stack([-a[..., 1], a[..., 0]], axis=-1)


def rot(t):
    """Rotation matrix R(t), shape ``(..., 2, 2)`` for array ``t``."""
    c, s = np.cos(t), np.sin(t)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def rotate_vec(t, a):
    """R(t) a, broadcasting over leading dimensions."""
    a = np.asarray(a, dtype=float)
    c, s = np.cos(t), np.sin(t)
    return np.stack([c * a[..., 0] - s * a[..., 1], s * a[..., 0] + c * a[..., 1]], axis=-1)


@dataclass(frozen=True)
class FieldProfile:
    """A T-periodic homogeneous electric field.

    ``func`` maps an array of times of shape ``s`` to an array of shape
    ``s + (2,)``.
    """

    period: float
    func: Callable[[np.ndarray], np.ndarray]
    description: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0):
            raise ValueError(f"period must be positive and finite, got {self.period!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        e = np.asarray(self.func(t), dtype=float)
        if e.shape != t.shape + (2,):
            e = np.broadcast_to(e, t.shape + (2,)).copy()
        if not np.all(np.isfinite(e)):
            raise ValueError(f"non-finite field sample in profile {self.description!r}")
        return e

    @property
    def is_zero(self) -> bool:
        return bool(self.params.get("zero", False))

    def validate(self, n_samples: int = 257, tol: float = 1e-9) -> None:
        """Check periodicity and continuity by sampling; raise ``ValueError`` otherwise."""
        t = np.linspace(0.0, self.period, n_samples)
        e0 = self(t)
        e1 = self(t + self.period)
        scale = max(1.0, float(np.max(np.abs(e0))))
        if np.max(np.abs(e1 - e0)) > tol * scale:
            raise ValueError(f"field {self.description!r} is not {self.period}-periodic")
        # continuity scan: jumps between neighbours must shrink under refinement
        fine = np.linspace(0.0, self.period, 8 * n_samples)
        ef = self(fine)
        jump_coarse = np.max(np.abs(np.diff(e0, axis=0)))
        jump_fine = np.max(np.abs(np.diff(ef, axis=0)))
        if jump_coarse > 1e-12 and jump_fine > 0.5 * jump_coarse:
            raise ValueError(f"field {self.description!r} looks discontinuous")


def field_preset(name: str, period: float, **params) -> FieldProfile:
    """Named drive profiles.

    ``zero``; ``constant`` (``vector``); ``cosine`` (``amplitude``,
    ``frequency``, ``direction``, ``phase``): ``E = A cos(w t + phase) d``;
    ``suppressed`` (``vector`` E0): ``E = E0 + R(-t) E0``.
    """
    if name == "zero":
        return FieldProfile(period, lambda t: np.zeros(np.shape(t) + (2,)), "zero", {"zero": True})
    if name == "constant":
        e0 = np.asarray(params.get("vector", (1.0, 0.0)), dtype=float)
        return FieldProfile(
            period,
            lambda t: np.broadcast_to(e0, np.shape(t) + (2,)).copy(),
            f"constant{tuple(e0)}",
            {"vector": tuple(e0), "zero": not np.any(e0)},
        )
    if name == "cosine":
        amp = float(params.get("amplitude", 1.0))
        freq = float(params.get("frequency", 1.0))
        phase = float(params.get("phase", 0.0))
        d = np.asarray(params.get("direction", (1.0, 0.0)), dtype=float)
        return FieldProfile(
            period,
            lambda t: amp * np.cos(freq * np.asarray(t) + phase)[..., None] * d,
            f"cosine(A={amp}, w={freq})",
            {"amplitude": amp, "frequency": freq, "phase": phase, "direction": tuple(d), "zero": amp == 0},
        )
    if name == "suppressed":
        e0 = np.asarray(params.get("vector", (0.2, 0.0)), dtype=float)
        return FieldProfile(
            period,
            lambda t: e0 + rotate_vec(-np.asarray(t, dtype=float), np.broadcast_to(e0, np.shape(t) + (2,))),
            f"suppressed{tuple(e0)}",
            {"vector": tuple(e0), "zero": not np.any(e0)},
        )
    raise KeyError(f"unknown field preset {name!r}")


FIELD_PRESETS = ("zero", "constant", "cosine", "suppressed")


class Decay(enum.Enum):
    V_DECAYS = "V_decays"
    GRADV_DECAYS = "gradV_decays"
    NEITHER = "neither"


@dataclass(frozen=True)
class PotentialSpec:
    """Bounded impurity potential ``V(t, x, y)`` with analytic gradient.

    ``radial`` means V depends on ``|q|`` only and ``static`` that it is
    time independent; the split-step evolver caches the potential when both hold.
    """

    V: Callable
    grad: Callable
    hessian_bound: float
    decay: Decay
    description: str = "custom"
    grad_sup: float = math.inf
    radial: bool = False
    static: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, t, x, y):
        return self.V(t, x, y)

    def gradient_decay_profile(self, radii, n_angles: int = 64, n_times: int = 8, period: float = TWO_PI):
        """Tail supremum of ``|grad V|`` beyond each radius (sampled)."""
        radii = np.asarray(radii, dtype=float)
        shells = np.concatenate([r * np.geomspace(1.0, 8.0, 24) for r in radii])
        ang = np.linspace(0.0, TWO_PI, n_angles, endpoint=False)
        ts = np.linspace(0.0, period, n_times, endpoint=False)
        sup_at = {}
        for r in np.unique(shells):
            x, y = r * np.cos(ang), r * np.sin(ang)
            sup_at[r] = max(float(np.max(np.hypot(*self.grad(t, x, y)))) for t in ts)
        out = []
        for r in radii:
            out.append(max(v for s, v in sup_at.items() if s >= r))
        return np.array(out)


def potential_preset(name: str, coupling: float = 0.0, width: float = 1.0, wavevector=(1.0, 0.0)) -> Optional[PotentialSpec]:
    """Impurity families, one per hypothesis class.

    ``radial_log_sin``: ``lam sin(ln(1 + |q|^2))`` bounded, non-decaying, with
    decaying gradient. ``gaussian_bump``: ``lam exp(-|q|^2 / 2 w^2)``.
    ``plane_wave``: ``lam cos(<k, q>)``, neither V nor its gradient decays.
    ``none`` returns ``None``.
    """
    lam = float(coupling)
    if name in ("none", None):
        return None
    if name == "radial_log_sin":

        def V(t, x, y):
            return lam * np.sin(np.log1p(x * x + y * y))

        def grad(t, x, y):
            r2 = x * x + y * y
            g = lam * np.cos(np.log1p(r2)) * 2.0 / (1.0 + r2)
            return g * x, g * y

        return PotentialSpec(V, grad, 4.0 * abs(lam), Decay.GRADV_DECAYS, f"radial_log_sin(lam={lam})",
                             grad_sup=abs(lam), radial=True, static=True,
                             params={"coupling": lam})
    if name == "gaussian_bump":
        w2 = float(width) ** 2

        def V(t, x, y):
            return lam * np.exp(-(x * x + y * y) / (2.0 * w2))

        def grad(t, x, y):
            g = -lam / w2 * np.exp(-(x * x + y * y) / (2.0 * w2))
            return g * x, g * y

        return PotentialSpec(V, grad, abs(lam) / w2, Decay.V_DECAYS, f"gaussian_bump(lam={lam}, w={width})",
                             grad_sup=abs(lam) * math.exp(-0.5) / float(width), radial=True, static=True,
                             params={"coupling": lam, "width": float(width)})
    if name == "plane_wave":
        k = np.asarray(wavevector, dtype=float)

        def V(t, x, y):
            return lam * np.cos(k[0] * x + k[1] * y)

        def grad(t, x, y):
            s = -lam * np.sin(k[0] * x + k[1] * y)
            return s * k[0], s * k[1]

        kk = float(k @ k)
        return PotentialSpec(V, grad, abs(lam) * kk, Decay.NEITHER, f"plane_wave(lam={lam}, k={tuple(k)})",
                             grad_sup=abs(lam) * math.sqrt(kk), static=True,
                             params={"coupling": lam, "wavevector": tuple(k)})
    raise KeyError(f"unknown potential preset {name!r}")


POTENTIAL_PRESETS = ("none", "radial_log_sin", "gaussian_bump", "plane_wave")


# --------------------------------------------------------------------------
# quadrature


def _segments(t0: float, t1: float, length: float):
    n = max(1, int(math.ceil(abs(t1 - t0) / length - 1e-12)))
    edges = np.linspace(t0, t1, n + 1)
    return edges[:-1], edges[1:]


def _gl_nodes(a, b):
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * _GL_X, half * _GL_W


def field_integrals(profile: FieldProfile, t0: float, t1: float):
    """``(int E, int R E)`` over ``[t0, t1]``."""
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise ValueError("integration bounds must be finite")
    if t0 == t1 or profile.is_zero:
        return np.zeros(2), np.zeros(2)
    a, b = _segments(t0, t1, profile.period)
    s, w = _gl_nodes(a, b)
    e = profile(s)
    ie = np.einsum("ij,ijk->k", w, e)
    ire = np.einsum("ij,ijk->k", w, rotate_vec(s, e))
    return ie, ire


def drift_integrals(profile: FieldProfile, t: float):
    """``a_c(t) = -int_0^t E_perp`` and ``a_v(t) = int_0^t R(s) E_perp(s) ds``."""
    ie, ire = field_integrals(profile, 0.0, t)
    return -perp(ie), perp(ire)


def phase_phi(profile: FieldProfile, t: float, t0: float = 0.0) -> float:
    """Scalar phase of the free displacement propagator S(t, t0).

    The inner integrals run from ``t0``, which makes S a two-parameter
    propagator (``S(t, s) S(s, t0) = S(t, t0)``); for ``t0 = 0`` this is the
    usual double integral.
    """
    if t < t0:
        raise ValueError("phase_phi requires t >= t0")
    if t == t0 or profile.is_zero:
        return 0.0
    a, b = _segments(t0, t, profile.period)
    total = 0.0
    cum_e = np.zeros(2)
    cum_re = np.zeros(2)
    for sa, sb in zip(a, b):
        s, w = _gl_nodes(sa, sb)  # (64,), (64,)
        inner_s, inner_w = _gl_nodes(np.full_like(s, sa), s)  # (64, 64)
        ei = profile(inner_s)
        in_e = cum_e + np.einsum("ij,ijk->ik", inner_w, ei)
        in_re = cum_re + np.einsum("ij,ijk->ik", inner_w, rotate_vec(inner_s, ei))
        es = profile(s)
        res = rotate_vec(s, es)
        integrand = 0.5 * np.sum(es * perp(in_e), -1) - 0.5 * np.sum(res * perp(in_re), -1)
        total += float(w @ integrand)
        ie, ire = field_integrals(profile, sa, sb)
        cum_e = cum_e + ie
        cum_re = cum_re + ire
    return total


# --------------------------------------------------------------------------
# resonance and predictions


class ResonanceClass(enum.Enum):
    RESONANT = "resonant"
    RATIONAL_RESONANT = "rational_resonant"
    NON_RESONANT = "non_resonant"


def resonance_ratio(T: float) -> Fraction:
    """Best rational approximation of ``T / 2pi`` with denominator <= 64."""
    return Fraction(T / TWO_PI).limit_denominator(RESONANCE_MAX_DENOMINATOR)


def classify_resonance(T: float) -> ResonanceClass:
    if not (math.isfinite(T) and T > 0):
        raise ValueError(f"period must be positive, got {T!r}")
    x = T / TWO_PI
    n = round(x)
    if n >= 1 and abs(x - n) <= RESONANCE_TOL:
        return ResonanceClass.RESONANT
    frac = resonance_ratio(T)
    if frac > 0 and abs(x - float(frac)) <= RESONANCE_TOL:
        return ResonanceClass.RATIONAL_RESONANT
    return ResonanceClass.NON_RESONANT


def resonance_multiple(T: float) -> int:
    """n with ``T = 2 pi n``; raises for non-resonant periods."""
    if classify_resonance(T) is not ResonanceClass.RESONANT:
        raise ValueError(f"T={T} is not an integer multiple of 2pi")
    return int(round(T / TWO_PI))


@dataclass(frozen=True)
class PredictionRecord:
    v_asy_pred: np.ndarray
    rho_pred: float
    spectral_expectation: str
    resonance: ResonanceClass
    mean_field: np.ndarray
    mean_rotated_field: np.ndarray

    def as_dict(self):
        return {
            "v_asy_pred": [float(x) for x in self.v_asy_pred],
            "rho_pred": float(self.rho_pred),
            "spectral_expectation": self.spectral_expectation,
            "resonance": self.resonance.value,
        }


def theorem_predictions(profile: FieldProfile, potential: Optional[PotentialSpec] = None, tol: float = 1e-10) -> PredictionRecord:
    """Asymptotic velocity, energy-growth rate and expected Floquet spectral type."""
    T = profile.period
    res = classify_resonance(T)
    ie, ire = field_integrals(profile, 0.0, T)
    mean_e, mean_re = ie / T, ire / T
    scale = max(1.0, float(np.max(np.abs(profile(np.linspace(0, T, 33))))))
    e_nonzero = np.linalg.norm(mean_e) > tol * scale
    re_nonzero = np.linalg.norm(mean_re) > tol * scale

    if res is ResonanceClass.RESONANT:
        v = perp(mean_re) - perp(mean_e)
        rho = 0.5 * float(mean_re @ mean_re)
        if e_nonzero or re_nonzero:
            label = "ac_except_finitely_many"
        else:
            label = "pure_point" if potential is None or potential.decay is Decay.V_DECAYS else "undetermined"
            rho = 0.0
    else:
        rho = 0.0
        if e_nonzero:
            v = -perp(mean_e)
            label = "ac_except_finitely_many"
        else:
            v = np.zeros(2)
            label = "undetermined"
            if potential is None and res is not ResonanceClass.RESONANT:
                label = "pure_point"
            elif (potential is not None and potential.decay is Decay.V_DECAYS
                  and res is ResonanceClass.RATIONAL_RESONANT and not re_nonzero):
                label = "pure_point"

    if potential is None:
        # free Floquet operator: product of commuting translations
        a_c = -perp(ie)
        a_v = perp(ire)
        if np.linalg.norm(a_c) > tol * scale or (res is ResonanceClass.RESONANT and np.linalg.norm(a_v) > tol * scale):
            label = "purely_ac"
        else:
            label = "pure_point"
    elif label == "ac_except_finitely_many" and potential.grad_sup < math.inf:
        g = potential.grad_sup
        if (e_nonzero and g < np.linalg.norm(mean_e)) or (re_nonzero and g < np.linalg.norm(mean_re)):
            label = "purely_ac"
    return PredictionRecord(np.asarray(v, dtype=float), float(rho), label, res, mean_e, mean_re)


def eval_fields(profile: FieldProfile, potential: Optional[PotentialSpec], t: float, q):
    """Pointwise ``(E(t), V(t, q), grad V(t, q))``."""
    q = np.asarray(q, dtype=float)
    e = profile(t)
    if potential is None:
        return e, 0.0, np.zeros(2)
    v = float(potential(t, q[0], q[1]))
    g = np.array([float(c) for c in potential.grad(t, q[0], q[1])])
    return e, v, g
