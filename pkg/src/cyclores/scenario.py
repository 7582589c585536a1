"""Scenario configuration, preset catalog and the batch runner behind the CLI."""

from __future__ import annotations

import configparser
import json
import math
import os
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .classical import PhasePoint, decompose
from .fields import (
    FIELD_PRESETS,
    POTENTIAL_PRESETS,
    ResonanceClass,
    TWO_PI,
    classify_resonance,
    drift_integrals,
    field_preset,
    perp,
    potential_preset,
    rotate_vec,
    theorem_predictions,
)
from .grid import BoundaryError, Grid2D, make_gaussian
from .observables import (
    asymptotic_velocity_estimate,
    autocorrelation_series,
    cesaro_means,
    energy_growth_fit,
    evolve_stroboscopic,
    kinetic_band,
    mourre_expectation,
    mourre_vector,
    spectral_classify,
    virial_check,
)
from .propagators import PropagatorPlan

OUTPUT_ROOT_ENV = "CYCLORES_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "cyclores-out"

REQUIRED = {
    "scenario": ("name", "n_periods"),
    "field": ("preset", "period"),
    "potential": ("preset",),
    "grid": ("n", "extent"),
    "stepping": ("steps_per_period",),
    "initial": ("q0", "p0", "sigma"),
}
FIELD_PARAMS = {
    "zero": (),
    "constant": ("vector",),
    "cosine": ("amplitude", "frequency", "phase", "direction"),
    "suppressed": ("vector",),
}
BOOL_WORDS = {"1": True, "yes": True, "true": True, "on": True, "0": False, "no": False, "false": False, "off": False}


class ConfigError(ValueError):
    """Configuration problems, one diagnostic per line."""

    def __init__(self, problems: List[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


@dataclass
class ScenarioConfig:
    name: str
    field_preset: str
    period: float
    field_params: Dict[str, object]
    potential_preset: str
    coupling: float
    width: float
    wavevector: Tuple[float, float]
    grid_n: int
    extent: float
    center: Tuple[float, float]
    steps_per_period: int
    frame: str
    n_periods: int
    q0: Tuple[float, float]
    p0: Tuple[float, float]
    sigma: float
    outputs: str = ""
    mourre: Tuple[str, ...] = ()
    growth_fit: bool = True
    velocity_fit: bool = True
    classifier: bool = True
    seed: int = 0
    momentum_budget: Optional[float] = None
    figures: bool = True
    source: str = "<memory>"

    def profile(self):
        return field_preset(self.field_preset, self.period, **self.field_params)

    def potential(self):
        return potential_preset(self.potential_preset, self.coupling, self.width, self.wavevector)

    def grid(self) -> Grid2D:
        return Grid2D(self.grid_n, self.extent, self.center)

    def plan(self) -> PropagatorPlan:
        return PropagatorPlan(self.profile(), self.potential(), self.grid(), self.steps_per_period, self.frame)


# --------------------------------------------------------------------------
# parsing


def parse_period(text: str) -> float:
    """Accepts plain numbers and multiples of pi such as ``2pi``, ``pi/2``, ``3*pi``."""
    s = text.strip().lower().replace(" ", "")
    m = re.fullmatch(r"([0-9.eE+-]*)\*?(pi|π)(?:/([0-9.eE+-]+))?", s)
    if m:
        coef = float(m.group(1)) if m.group(1) not in ("", "+") else 1.0
        if m.group(1) == "-":
            coef = -1.0
        div = float(m.group(3)) if m.group(3) else 1.0
        return coef * math.pi / div
    return float(s)


def _vector(text: str) -> Tuple[float, float]:
    parts = [p for p in re.split(r"[,\s]+", text.strip().strip("()[]")) if p]
    if len(parts) != 2:
        raise ValueError(f"expected two components, got {text!r}")
    return float(parts[0]), float(parts[1])


def _line_index(text: str) -> Dict[Tuple[str, str], int]:
    """Line numbers of section headers (key '') and keys, for diagnostics."""
    idx = {}
    section = ""
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            idx[(section, "")] = i
            continue
        m = re.match(r"([^=:]+)[=:]", s)
        if m:
            idx[(section, m.group(1).strip().lower())] = i
    return idx


def parse_config_text(text: str, source: str = "<string>") -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}".replace("\n", " ")]) from exc
    lines = _line_index(text)
    problems: List[str] = []

    def where(section, key=""):
        ln = lines.get((section, key)) or lines.get((section, ""))
        return f"{source}:{ln}" if ln else source

    for section, keys in REQUIRED.items():
        for key in keys:
            if not cp.has_option(section, key):
                problems.append(f"{where(section)}: missing key [{section}] {key}")
    if problems:
        raise ConfigError(problems)

    def get(section, key, conv, default=None):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            problems.append(f"{where(section, key)}: [{section}] {key} = {raw!r}: {exc}")
            return default

    def boolean(raw):
        v = raw.strip().lower()
        if v not in BOOL_WORDS:
            raise ValueError("expected yes/no")
        return BOOL_WORDS[v]

    name = cp.get("scenario", "name").strip()
    fpreset = cp.get("field", "preset").strip()
    if fpreset not in FIELD_PRESETS:
        problems.append(f"{where('field', 'preset')}: unknown field preset {fpreset!r} (known: {', '.join(FIELD_PRESETS)})")
    period = get("field", "period", parse_period, 1.0)
    if period is not None and not period > 0:
        problems.append(f"{where('field', 'period')}: period must be positive")
    fparams = {}
    for key in FIELD_PARAMS.get(fpreset, ()):
        conv = _vector if key in ("vector", "direction") else float
        val = get("field", key, conv)
        if val is not None:
            fparams[key] = val
    for key in cp.options("field"):
        if key not in ("preset", "period") and key not in FIELD_PARAMS.get(fpreset, ()):
            problems.append(f"{where('field', key)}: key {key!r} not used by field preset {fpreset!r}")

    ppreset = cp.get("potential", "preset").strip()
    if ppreset not in POTENTIAL_PRESETS:
        problems.append(f"{where('potential', 'preset')}: unknown potential preset {ppreset!r} (known: {', '.join(POTENTIAL_PRESETS)})")
    coupling = get("potential", "coupling", float, 0.0)
    width = get("potential", "width", float, 1.0)
    wavevector = get("potential", "wavevector", _vector, (1.0, 0.0))
    if width is not None and not width > 0:
        problems.append(f"{where('potential', 'width')}: width must be positive")

    grid_n = get("grid", "n", int, 256)
    extent = get("grid", "extent", float, 40.0)
    center = get("grid", "center", _vector, (0.0, 0.0))
    steps = get("stepping", "steps_per_period", int, 256)
    frame = get("stepping", "frame", lambda s: s.strip().lower(), "lab")
    if frame not in ("lab", "comoving"):
        problems.append(f"{where('stepping', 'frame')}: frame must be lab or comoving")
    if steps is not None and (steps < 64 or steps % 2):
        problems.append(f"{where('stepping', 'steps_per_period')}: steps_per_period must be even and >= 64")
    n_periods = get("scenario", "n_periods", int, 1)
    if n_periods is not None and n_periods < 1:
        problems.append(f"{where('scenario', 'n_periods')}: n_periods must be >= 1")
    seed = get("scenario", "seed", int, 0)
    outputs = cp.get("scenario", "outputs", fallback="").strip()
    q0 = get("initial", "q0", _vector, (0.0, 0.0))
    p0 = get("initial", "p0", _vector, (0.0, 0.0))
    sigma = get("initial", "sigma", float, 1.0)
    if sigma is not None and not sigma > 0:
        problems.append(f"{where('initial', 'sigma')}: sigma must be positive")

    tags = tuple(t for t in re.split(r"[,\s]+", cp.get("analysis", "mourre", fallback="")) if t)
    for t in tags:
        if t not in ("A_c", "A_v"):
            problems.append(f"{where('analysis', 'mourre')}: unknown Mourre tag {t!r}")
    growth = get("analysis", "growth_fit", boolean, True)
    velocity = get("analysis", "velocity_fit", boolean, True)
    classifier = get("analysis", "classifier", boolean, True)
    figures = get("analysis", "figures", boolean, True)
    budget = get("analysis", "momentum_budget", float, None)

    if grid_n is not None and (grid_n < 8 or grid_n & (grid_n - 1)):
        problems.append(f"{where('grid', 'n')}: grid size must be a power of two >= 8")
    if extent is not None and not extent > 0:
        problems.append(f"{where('grid', 'extent')}: extent must be positive")
    if problems:
        raise ConfigError(problems)

    cfg = ScenarioConfig(
        name=name, field_preset=fpreset, period=period, field_params=fparams, potential_preset=ppreset,
        coupling=coupling, width=width, wavevector=wavevector, grid_n=grid_n, extent=extent, center=center,
        steps_per_period=steps, frame=frame, n_periods=n_periods, q0=q0, p0=p0, sigma=sigma, outputs=outputs,
        mourre=tags, growth_fit=growth, velocity_fit=velocity, classifier=classifier, seed=seed,
        momentum_budget=budget, figures=figures, source=source,
    )
    validate_config(cfg, where)
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from exc
    return parse_config_text(text, str(path))


# --------------------------------------------------------------------------
# validation


def centroid_budget(cfg: ScenarioConfig, samples_per_period: int = 32):
    """Largest local excursion and local momentum of the free classical centroid.

    In the comoving frame the free centroid is stationary, so only the
    initial data and its cyclotron circle count.
    """
    profile = cfg.profile()
    z0 = PhasePoint(cfg.q0, cfg.p0)
    d = decompose(z0)
    center = np.asarray(cfg.center)
    horizon = cfg.n_periods * cfg.period
    if cfg.frame == "comoving":
        ts = np.linspace(0.0, TWO_PI, 65)
    else:
        ts = np.linspace(0.0, horizon, cfg.n_periods * samples_per_period + 1)
    qmax = 0.0
    pmax = 0.0
    for t in ts:
        if cfg.frame == "comoving":
            vp = rotate_vec(-t, perp(d.velocity))
            c = d.center
        else:
            a_c, a_v = drift_integrals(profile, t)
            vp = rotate_vec(-t, perp(d.velocity) + a_v)
            c = d.center + a_c
        q = c + vp - center
        v = -perp(vp)
        D = v + 0.5 * perp(q)
        qmax = max(qmax, float(np.max(np.abs(q))))
        pmax = max(pmax, float(np.max(np.abs(D))))
    return qmax, pmax


def validate_config(cfg: ScenarioConfig, where=lambda s, k="": "") -> None:
    problems = []
    try:
        cfg.profile().validate()
    except ValueError as exc:
        problems.append(f"{where('field')}: {exc}")
    try:
        classify_resonance(cfg.period)
    except ValueError as exc:
        problems.append(f"{where('field', 'period')}: {exc}")
    if problems:
        raise ConfigError(problems)
    grid = cfg.grid()
    qmax, pmax = centroid_budget(cfg)
    spread_q = 6.0 * cfg.sigma
    spread_p = 3.0 * (0.5 / cfg.sigma + 0.5 * cfg.sigma)
    budget = cfg.momentum_budget if cfg.momentum_budget is not None else pmax + spread_p
    try:
        grid.check_position_budget(qmax, spread_q)
    except ValueError as exc:
        problems.append(f"{where('grid', 'extent')}: {exc} over {cfg.n_periods} periods")
    try:
        grid.check_momentum_budget(budget)
    except ValueError as exc:
        problems.append(f"{where('grid', 'n')}: {exc}")
    if problems:
        raise ConfigError(problems)


# --------------------------------------------------------------------------
# preset catalog


@dataclass(frozen=True)
class PresetEntry:
    name: str
    anchor: str
    description: str
    text: str


def _ini(name, field, potential, grid, stepping, initial, n_periods, analysis):
    return (
        f"[scenario]\nname = {name}\nn_periods = {n_periods}\nseed = 0\n\n"
        f"[field]\n{field}\n\n[potential]\n{potential}\n\n[grid]\n{grid}\n\n"
        f"[stepping]\n{stepping}\n\n[initial]\n{initial}\n\n[analysis]\n{analysis}\n"
    )


PRESETS: Tuple[PresetEntry, ...] = (
    PresetEntry(
        "resonant_growth",
        "resonant energy growth: <H_La>(nT)/(nT)^2 -> rho = |<RE>|^2 / 2, independent of V",
        "E = (cos t, 0), T = 2pi, no impurity; free closed-form growth rate 1/8",
        _ini("resonant_growth", "preset = cosine\nperiod = 2pi\namplitude = 1.0\nfrequency = 1.0",
             "preset = none", "n = 512\nextent = 80", "steps_per_period = 256\nframe = comoving",
             "q0 = 0, 0\np0 = 0, 0\nsigma = 1.0", 16, "mourre = A_v\ngrowth_fit = yes\nvelocity_fit = yes\nclassifier = yes"),
    ),
    PresetEntry(
        "hall_drift",
        "non-resonant drift: v_asy = -(1/T) int E_perp on the absolutely continuous subspace",
        "constant E = (0.2, 0), T = 1, no impurity; packet prepared with the drift velocity",
        _ini("hall_drift", "preset = constant\nperiod = 1.0\nvector = 0.2, 0", "preset = none",
             "n = 256\nextent = 40", "steps_per_period = 256\nframe = lab",
             "q0 = 0.2, 0\np0 = 0, -0.1\nsigma = 1.0", 32, "mourre = A_c\ngrowth_fit = no\nvelocity_fit = yes\nclassifier = yes"),
    ),
    PresetEntry(
        "impurity_growth",
        "resonant energy growth with a decaying-gradient impurity (same V-independent rate)",
        "E = (cos t, 0), T = 2pi, V = 0.3 sin(ln(1 + |q|^2))",
        _ini("impurity_growth", "preset = cosine\nperiod = 2pi\namplitude = 1.0\nfrequency = 1.0",
             "preset = radial_log_sin\ncoupling = 0.3", "n = 512\nextent = 80",
             "steps_per_period = 256\nframe = comoving", "q0 = 0, 0\np0 = 0, 0\nsigma = 1.0", 16,
             "mourre =\ngrowth_fit = yes\nvelocity_fit = yes\nclassifier = yes"),
    ),
    PresetEntry(
        "pure_point_trap",
        "local impurity with int E = int RE = 0 at T in 2pi Q: Floquet spectrum pure point",
        "E = (0.2 cos 2t, 0), T = 2pi, attractive Gaussian well (coupling -0.2, width 2)",
        _ini("pure_point_trap", "preset = cosine\nperiod = 2pi\namplitude = 0.2\nfrequency = 2.0",
             "preset = gaussian_bump\ncoupling = -0.2\nwidth = 2.0", "n = 256\nextent = 40",
             "steps_per_period = 256\nframe = lab", "q0 = 0, 0\np0 = 0, 0\nsigma = 1.0", 64,
             "mourre =\ngrowth_fit = no\nvelocity_fit = yes\nclassifier = yes"),
    ),
    PresetEntry(
        "small_gradient_ac",
        "small impurity gradient relative to the mean field: Floquet spectrum purely absolutely continuous",
        "constant E = (0.5, 0), T = 4, Gaussian bump with sup|grad V| = 0.12 < 0.5",
        _ini("small_gradient_ac", "preset = constant\nperiod = 4.0\nvector = 0.5, 0",
             "preset = gaussian_bump\ncoupling = 0.2\nwidth = 1.0", "n = 256\nextent = 40",
             "steps_per_period = 256\nframe = comoving", "q0 = 0, 0\np0 = 0, 0\nsigma = 1.0", 64,
             "mourre = A_c\ngrowth_fit = no\nvelocity_fit = yes\nclassifier = yes"),
    ),
    PresetEntry(
        "suppressed_drift",
        "resonant drive E0 + R(-t) E0 suppresses the asymptotic velocity (v_asy = 0)",
        "E(t) = E0 + R(-t) E0 with E0 = (0.2, 0), T = 2pi, no impurity",
        _ini("suppressed_drift", "preset = suppressed\nperiod = 2pi\nvector = 0.2, 0", "preset = none",
             "n = 256\nextent = 40", "steps_per_period = 256\nframe = comoving",
             "q0 = 0, 0\np0 = 0, 0\nsigma = 1.0", 16,
             "mourre = A_c A_v\ngrowth_fit = yes\nvelocity_fit = yes\nclassifier = yes"),
    ),
)


def preset_names() -> List[str]:
    return [p.name for p in PRESETS]


def get_preset(name: str) -> PresetEntry:
    for p in PRESETS:
        if p.name == name:
            return p
    raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")


def preset_config(name: str) -> ScenarioConfig:
    return parse_config_text(get_preset(name).text, f"<preset {name}>")


# --------------------------------------------------------------------------
# running


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))


def _rel(measured, predicted):
    if predicted is None:
        return None
    scale = float(np.linalg.norm(predicted))
    diff = float(np.linalg.norm(np.asarray(measured) - np.asarray(predicted)))
    return diff / scale if scale > 1e-12 else None


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


@dataclass
class RunResult:
    config: ScenarioConfig
    summary: dict
    trajectory: object
    outdir: Optional[Path] = None
    files: List[Path] = field(default_factory=list)


def analyse(cfg: ScenarioConfig, traj, plan, psi0) -> dict:
    profile = plan.profile
    pred = theorem_predictions(profile, plan.potential)
    out = {
        "scenario": cfg.name,
        "resonance": classify_resonance(cfg.period).value,
        "predictions": pred.as_dict(),
        "n_periods": cfg.n_periods,
        "frame": cfg.frame,
    }
    norms = traj.column("norm")
    out["norm_drift"] = float(np.max(np.abs(norms - norms[0])))
    out["max_boundary_mass"] = float(np.max(traj.column("boundary_mass")))
    out["kinetic_band"] = kinetic_band(traj)
    if cfg.growth_fit and len(traj) >= 9:
        g = energy_growth_fit(traj, pred.rho_pred)
        out["rho_hat"] = g.rho_hat
        out["rho_pred"] = pred.rho_pred
        out["rho_rel_dev"] = g.relative_deviation
        out["rho_abs_dev"] = abs(g.rho_hat - pred.rho_pred)
        out["growth_resonant"] = g.resonant
    if cfg.velocity_fit and len(traj) >= 9:
        v = asymptotic_velocity_estimate(traj)
        out["v_asy_hat"] = v.velocity
        out["v_asy_uncertainty"] = v.uncertainty
        out["v_asy_pred"] = pred.v_asy_pred
        out["v_asy_abs_dev"] = float(np.linalg.norm(v.velocity - pred.v_asy_pred))
        out["v_asy_rel_dev"] = _rel(v.velocity, pred.v_asy_pred)
        out["virial"] = virial_check(traj)
    series = autocorrelation_series(traj)
    if cfg.classifier and series.size >= 16:
        out["cesaro_mean"] = float(cesaro_means(series)[-1])
        out["classifier"] = spectral_classify(series)
    out["spectral_expectation"] = pred.spectral_expectation
    mourre = []
    for tag in cfg.mourre:
        vec = mourre_vector(profile, tag)
        if float(vec @ vec) < 1e-24:
            mourre.append({"tag": tag, "skipped": "a(T) = 0"})
            continue
        rep = mourre_expectation(plan, psi0, tag)
        mourre.append({"tag": tag, "predicted": rep.predicted, "measured": rep.measured,
                       "deviation": rep.deviation, "radius": rep.radius})
    out["mourre"] = mourre
    return out


def _report_lines(summary: dict) -> List[str]:
    lines = []
    for k, v in summary.items():
        if k in ("predictions", "mourre"):
            continue
        lines.append(f"{k}: {_fmt(v)}")
    for k, v in summary["predictions"].items():
        lines.append(f"prediction.{k}: {_fmt(v)}")
    for m in summary["mourre"]:
        for k, v in m.items():
            if k != "tag":
                lines.append(f"mourre.{m['tag']}.{k}: {_fmt(v)}")
    return lines


def _fmt(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return "(" + ", ".join(_fmt(x) for x in v) + ")"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def run_scenario(cfg: ScenarioConfig, outdir=None, write: bool = True) -> RunResult:
    """Evolve, analyse and (optionally) write CSV, report, JSON summary and figures.

    Raises :class:`BoundaryError` / ``RuntimeError`` on a runtime abort.
    """
    plan = cfg.plan()
    grid = plan.grid
    psi0 = make_gaussian(grid, cfg.q0, cfg.p0, cfg.sigma)
    t_start = time.perf_counter()
    traj = evolve_stroboscopic(plan, psi0, cfg.n_periods, scenario=cfg.name)
    summary = analyse(cfg, traj, plan, psi0)
    summary["runtime_s"] = time.perf_counter() - t_start
    summary["config"] = _jsonable(asdict(cfg))
    result = RunResult(cfg, summary, traj)
    if not write:
        return result
    if outdir is None:
        outdir = output_root() / (cfg.outputs or cfg.name)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "trajectory.csv"
    traj.write_csv(csv_path)
    report_path = outdir / "report.txt"
    report_path.write_text("\n".join(_report_lines({k: v for k, v in summary.items() if k != "config"})) + "\n")
    json_path = outdir / "summary.json"
    json_path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    result.files = [csv_path, report_path, json_path]
    if cfg.figures:
        from .plotting import plot_trajectory

        fig = outdir / "trajectory.png"
        plot_trajectory(traj, fig, title=cfg.name)
        result.files.append(fig)
    result.outdir = outdir
    return result


__all__ = [
    "BoundaryError", "ConfigError", "PRESETS", "ScenarioConfig", "get_preset", "load_config", "output_root",
    "parse_config_text", "parse_period", "preset_config", "preset_names", "run_scenario",
]
