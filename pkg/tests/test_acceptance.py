"""Acceptance criteria 1-10, each printing one PASS/FAIL line.

The lines are repeated in the "acceptance criteria" section of the pytest
terminal summary. A failing criterion fails its test; the analysis of the
known failures is kept in the decisions ledger.
"""

import math
import time

import numpy as np
import pytest
from conftest import BATTERY, preset_result, random_battery, record_acceptance

from cyclores.classical import PhasePoint, flow_x, sojourn_bound_scan
from cyclores.fields import TWO_PI, field_preset, perp, potential_preset
from cyclores.grid import Grid2D, inner, landau_coherent_state, make_gaussian
from cyclores.observables import (
    asymptotic_velocity_estimate,
    autocorrelation_series,
    cesaro_means,
    expectations,
    kinetic_band,
    mourre_expectation,
    virial_check,
)
from cyclores.propagators import PropagatorPlan, SplitStepEvolver, apply_free, floquet_map
from cyclores.scenario import get_preset, parse_config_text, run_scenario

pytestmark = pytest.mark.slow


def l2(a, b):
    return float(np.linalg.norm(a.amplitudes - b.amplitudes)) * a.grid.h


def test_criterion_01_landau_periodicity():
    start = time.perf_counter()
    grid = Grid2D(512, 80.0)
    psi0 = landau_coherent_state(grid, (0.0, 0.0))
    plan = PropagatorPlan(field_preset("zero", TWO_PI), None, grid, 256)
    ev = SplitStepEvolver(plan, psi0)
    ev.advance(256)
    ov = inner(ev.state(), psi0)
    runtime = time.perf_counter() - start
    ok = abs(ov + 1.0) <= 1e-6 and runtime < 10.0
    record_acceptance(1, ok, f"inner(psi(2pi), psi0) = {ov.real:+.12f}{ov.imag:+.1e}i, |+1| = {abs(ov + 1):.1e}, "
                             f"{runtime:.1f} s")
    assert ok


def test_criterion_02_closed_form_equivalence(grid256):
    start = time.perf_counter()
    presets = {
        "zero": field_preset("zero", TWO_PI),
        "constant": field_preset("constant", TWO_PI),
        "cosine": field_preset("cosine", TWO_PI),
        "suppressed": field_preset("suppressed", TWO_PI),
    }
    worst_err, worst_order, parts = 0.0, math.inf, []
    for name, prof in presets.items():
        errs = {}
        for steps in (256, 512):
            plan = PropagatorPlan(prof, None, grid256, steps)
            e = 0.0
            for q0, p0, s in BATTERY:
                psi = make_gaussian(grid256, q0, p0, s)
                e = max(e, l2(floquet_map(plan, psi), apply_free(psi, prof, TWO_PI)))
            errs[steps] = e
        worst_err = max(worst_err, errs[256])
        if errs[256] > 1e-12:
            order = math.log2(errs[256] / errs[512])
            worst_order = min(worst_order, order)
            parts.append(f"{name} {errs[256]:.2e} (order {order:.2f})")
        else:
            parts.append(f"{name} {errs[256]:.0e} (exact)")
    runtime = time.perf_counter() - start
    ok = worst_err <= 1e-4 and worst_order >= 1.9 and runtime < 60
    record_acceptance(2, ok, f"max L2 error {worst_err:.2e} vs 1e-4, min order {worst_order:.2f}, {runtime:.0f} s: "
                             + "; ".join(parts))
    assert ok


def test_criterion_03_ehrenfest(grid256):
    profiles = [field_preset("constant", TWO_PI, vector=(0.3, -0.2)), field_preset("cosine", TWO_PI),
                field_preset("suppressed", TWO_PI, vector=(0.2, 0.1))]
    times = TWO_PI * (np.arange(1, 17) / 16.0)
    worst = 0.0
    for prof in profiles:
        for q0, p0, s in BATTERY:
            psi = make_gaussian(grid256, q0, p0, s)
            z0 = PhasePoint(q0, p0)
            for t in times:
                q = expectations(apply_free(psi, prof, float(t)))["mean_q"]
                worst = max(worst, float(np.max(np.abs(q - flow_x(prof, float(t), z0)))))
    ok = worst <= 1e-6
    record_acceptance(3, ok, f"max |<q>(t) - flow_x| = {worst:.1e} over 3 drives x 5 states x 16 times")
    assert ok


def test_criterion_04_resonant_growth():
    start = time.perf_counter()
    free = preset_result("resonant_growth").summary
    imp = preset_result("impurity_growth").summary
    runtime = time.perf_counter() - start
    d_free = abs(free["rho_hat"] - 0.125) / 0.125
    d_imp = abs(imp["rho_hat"] - 0.125) / 0.125
    ok = d_free <= 0.01 and d_imp <= 0.10 and runtime < 600
    record_acceptance(4, ok, f"rho_hat free {free['rho_hat']:.6f} ({d_free:.1e}), impurity {imp['rho_hat']:.6f} "
                             f"({d_imp:.1e}), {runtime:.0f} s")
    assert ok


def hall_with_impurity_text():
    """hall_drift plus radial_log_sin(0.2), packet started 30 away from the impurity."""
    q0 = np.array([30.2, 0.0])
    p0 = np.array([0.0, -0.1]) + 0.5 * perp(q0 - np.array([0.2, 0.0]))
    text = get_preset("hall_drift").text
    text = text.replace("name = hall_drift", "name = hall_drift_impurity")
    text = text.replace("[potential]\npreset = none", "[potential]\npreset = radial_log_sin\ncoupling = 0.2")
    text = text.replace("extent = 40", "extent = 40\ncenter = 30, 0")
    text = text.replace("q0 = 0.2, 0\np0 = 0, -0.1", f"q0 = {q0[0]}, {q0[1]}\np0 = {p0[0]}, {p0[1]}")
    return text


def test_criterion_05_hall_drift():
    target = np.array([0.0, -0.2])
    free = asymptotic_velocity_estimate(preset_result("hall_drift").trajectory)
    imp_cfg = parse_config_text(hall_with_impurity_text())
    imp = asymptotic_velocity_estimate(run_scenario(imp_cfg, write=False).trajectory)
    e_free, e_imp = free.relative_error(target), imp.relative_error(target)
    ok = e_free <= 0.05 and e_imp <= 0.10
    record_acceptance(5, ok, f"v_asy {np.round(free.velocity, 5)} ({e_free:.1e} vs 5%), with impurity "
                             f"{np.round(imp.velocity, 4)} ({e_imp:.1%} vs 10%)")
    assert ok


def test_criterion_06_drift_suppression():
    res = preset_result("suppressed_drift")
    v = asymptotic_velocity_estimate(res.trajectory).velocity
    e0 = 0.2
    ok = float(np.linalg.norm(v)) <= 0.02 * e0
    record_acceptance(6, ok, f"|v_asy| = {np.linalg.norm(v):.1e} vs {0.02 * e0:.0e}")
    assert ok


def test_criterion_07_pure_point_trap():
    traj = preset_result("pure_point_trap").trajectory
    series = autocorrelation_series(traj)
    m64 = float(cesaro_means(series)[63])
    band = kinetic_band(traj)
    vir = virial_check(traj)
    ok = m64 >= 0.2 and band <= 0.05 and vir <= 1e-3
    record_acceptance(7, ok, f"M_64 = {m64:.4f} (>= 0.2), kinetic band {band:.2%} (<= 5%), virial {vir:.1e} (<= 1e-3)")
    assert ok


def test_criterion_08_free_mourre(grid256):
    cases = [("A_c", field_preset("constant", TWO_PI, vector=(1.0, 0.0))), ("A_v", field_preset("cosine", TWO_PI))]
    worst, parts = 0.0, []
    for tag, prof in cases:
        plan = PropagatorPlan(prof, None, grid256)
        devs = []
        for q0, p0, s in random_battery(10, seed=8):
            rep = mourre_expectation(plan, make_gaussian(grid256, q0, p0, s), tag)
            devs.append(rep.deviation)
        worst = max(worst, max(devs))
        parts.append(f"{tag}: |a|^2 = {rep.predicted:.6f}, max dev {max(devs):.1e}")
    ok = worst <= 1e-5
    record_acceptance(8, ok, "; ".join(parts))
    assert ok


def test_criterion_09_mourre_decay():
    prof = field_preset("constant", TWO_PI, vector=(1.0, 0.0))
    pot = potential_preset("radial_log_sin", 0.3)
    table = {}
    for name, direction in (("x", (1.0, 0.0)), ("y", (0.0, 1.0))):
        devs = []
        for r in (0.0, 20.0, 60.0):
            q0 = np.asarray(direction) * r
            grid = Grid2D(256, 40.0, tuple(q0 + np.array([0.0, -3.0])))
            psi = make_gaussian(grid, q0, 0.5 * perp(q0), 1.0)
            devs.append(mourre_expectation(PropagatorPlan(prof, pot, grid, 256), psi, "A_c").deviation)
        table[name] = devs
    ok = all(d[0] > d[1] > d[2] and d[2] <= 1e-3 for d in table.values())
    detail = "; ".join(f"along {k}: " + ", ".join(f"{v:.2e}" for v in d) for k, d in table.items())
    record_acceptance(9, ok, f"deviation at |q0| = 0, 20, 60 -> {detail} (need strictly decreasing, <= 1e-3 at 60)")
    assert ok


def test_criterion_10_sojourn_bound():
    start = time.perf_counter()

    def f(t, q):
        q = np.asarray(q)
        return 1.0 / (1.0 + np.sum(q * q, axis=-1))

    res = sojourn_bound_scan(f, field_preset("zero", TWO_PI), [10, 100, 1000])
    vals = [v for _, v in res]
    ratio = max(vals) / min(vals)
    runtime = time.perf_counter() - start
    ok = ratio <= 3 and runtime < 30
    record_acceptance(10, ok, "scan max " + ", ".join(f"{v:.4f}" for v in vals) + f", ratio {ratio:.3f}, "
                              f"{runtime:.1f} s")
    assert ok
