"""Energy-efficiency simulation of multi-band massive MIMO networks."""
from .scenario import (
    AntennaPatternParams, Band, BaseStation, Scenario, ScenarioError, ScenarioValidationError,
    UserEquipment, NoiseParams, generate_synthetic, load_scenario, make_band, save_scenario,
)
from .propagation import ChannelGains, compute_gains
from .power_model import PowerModelParams, POWER_PRESETS, power_breakdown
from .assignment import Assignment, run_algorithm
from .allocation import (
    AllocationState, InfeasibleError, NonConvergenceError, algorithm7, benchmark_allocation,
    feasibility_check,
)
from .evaluation import Metrics, evaluate
from .estimators import PowerAllocator, UEAssigner

__version__ = "0.1.0"
