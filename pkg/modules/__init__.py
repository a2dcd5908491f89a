__version__ = "0.1.0"

from .errors import VCQAError
from .schedule import ScheduleSpec, PiecewiseHermite, LinearSchedule
from .hamiltonian import PauliSum, ProblemInstance, AnnealSetup
from .evolve import IntegratorConfig, Trajectory, EvolutionMetrics
from .spectrum import GapProfile
from .optimize import OptimizerConfig, OptimizationResult
from .annealtime import AnnealTimeReport
from .harness import ExperimentConfig, ResultRecord
