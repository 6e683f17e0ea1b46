"""Discrete-event simulator comparing LTE-mmWave dual connectivity with hard
handover."""
from .config import SimulationParams, SweepSpec, load_config, run_seed
from .simulation import RunResult, Simulation, run_simulation

__version__ = "0.1.0"

__all__ = ["SimulationParams", "SweepSpec", "load_config", "run_seed", "RunResult", "Simulation",
           "run_simulation", "__version__"]
