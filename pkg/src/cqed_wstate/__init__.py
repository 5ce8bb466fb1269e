"""W-state generation in cavity QED: STIRAP, Zeno dynamics and a transitionless shortcut."""
from __future__ import annotations

from .backend import NAME as KERNEL
from .core import SystemConfig, dark_state, fidelity, population, w_state
from .dynamics import IntegrationError, TimeGrid, evolve_lindblad, evolve_schrodinger, lindblad_ops
from .hamiltonians import build_APF, build_H0, build_HCDD, build_Heff, build_HZ, numeric_cdd
from .protocols import (
    ProtocolResult,
    adiabaticity_measure,
    effective_model_chain,
    run_adiabatic,
    run_job,
    run_shortcut,
    run_shortcut_n_atoms,
    run_zeno,
)
from .pulses import ShortcutParams, StirapParams, shortcut_schedule, stirap_schedule, zeno_schedule

__version__ = "0.1.0"

__all__ = [
    "KERNEL", "SystemConfig", "dark_state", "fidelity", "population", "w_state",
    "IntegrationError", "TimeGrid", "evolve_lindblad", "evolve_schrodinger", "lindblad_ops",
    "build_APF", "build_H0", "build_HCDD", "build_Heff", "build_HZ", "numeric_cdd",
    "ProtocolResult", "adiabaticity_measure", "effective_model_chain", "run_adiabatic",
    "run_job", "run_shortcut", "run_shortcut_n_atoms", "run_zeno",
    "ShortcutParams", "StirapParams", "shortcut_schedule", "stirap_schedule", "zeno_schedule",
]
