"""crowdflow: finite-volume crowds with nonlocal interactions and moving agents.

The package splits into building blocks (mesh, kernels, nonlocal
averaging, the finite-volume step, agent dynamics, geodesic direction
fields), the three shipped scenarios, the coupled stepping loop, file
and command line plumbing, and a verification harness.
"""

from .coupling import (Frame, SimState, SolverError, coupled_step,
                       initial_state, load_state, run, save_state)
from .scenarios import (SCENARIO_TAGS, ScenarioError, apply_overrides,
                        build_scenario, default_config)

__version__ = "0.1.0"

__all__ = [
    "Frame", "SimState", "SolverError", "coupled_step", "initial_state",
    "load_state", "run", "save_state", "SCENARIO_TAGS", "ScenarioError",
    "apply_overrides", "build_scenario", "default_config", "__version__",
]
