"""Energy-stable IMEX relaxation Runge-Kutta integration of phase-field
gradient flows in scalar-auxiliary-variable form, with a Fourier
pseudo-spectral spatial discretization and an experiment harness."""

__version__ = "0.1.0"

from .spectral import PeriodicGrid, SpectralContext
from .model import ModelSpec, Potential, SavState, builtin_potential, initial_state
from .tableau import DoubleButcherTableau, builtin_tableau, load_tableau, validate
from .integrator import (IDT, RT, STANDARD, StepRecord, compute_gamma,
                         compute_stages, energy_defect, integrate_steps,
                         integrate_to, step)
from .presets import PRESETS, ExperimentPreset, get_preset

__all__ = [
    "__version__",
    "PeriodicGrid", "SpectralContext",
    "ModelSpec", "Potential", "SavState", "builtin_potential", "initial_state",
    "DoubleButcherTableau", "builtin_tableau", "load_tableau", "validate",
    "IDT", "RT", "STANDARD", "StepRecord", "compute_gamma", "compute_stages",
    "energy_defect", "integrate_steps", "integrate_to", "step",
    "PRESETS", "ExperimentPreset", "get_preset",
]
