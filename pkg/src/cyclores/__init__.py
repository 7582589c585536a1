"""Charged quantum particle in the plane: constant magnetic field, periodic electric drive, impurity potential.

Modules
-------
fields        drive profiles, impurity presets, drift integrals, phases, predictions
classical     guiding-centre decomposition, exact flow, sojourn-time averages
grid          periodic grids, wave functions, Weyl translations, rotations
propagators   exact free propagator, Floquet closed form, split-step evolver
observables   expectations, trajectories, Mourre differences, estimators
scenario      configuration files, preset catalog, batch runner
cli           command line interface
"""

from .fields import (
    FieldProfile,
    PotentialSpec,
    ResonanceClass,
    classify_resonance,
    drift_integrals,
    eval_fields,
    field_preset,
    phase_phi,
    potential_preset,
    theorem_predictions,
)
from .grid import Grid2D, WaveFunction, apply_phase_translation, inner, landau_coherent_state, make_gaussian
from .propagators import (
    PropagatorPlan,
    SplitStepEvolver,
    apply_free,
    apply_landau,
    apply_S,
    floquet_closed_form,
    floquet_map,
    strang_step,
)
from .observables import (
    Trajectory,
    asymptotic_velocity_estimate,
    autocorrelation_series,
    energy_growth_fit,
    evolve_stroboscopic,
    expectations,
    mourre_expectation,
    spectral_classify,
    virial_check,
)

__version__ = "0.1.0"
