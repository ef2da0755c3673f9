"""Monte Carlo simulator for multi-operator mmWave spectrum access.

Compares exclusive (licensed), pooled and hybrid access on two carriers with
a load-aware greedy cell and carrier association.
"""
from .scenario import ScenarioConfig, build_scenario, load_scenario
from .seeding import derive_seed

__version__ = "0.1.0"

__all__ = ["ScenarioConfig", "build_scenario", "load_scenario", "derive_seed", "__version__"]
