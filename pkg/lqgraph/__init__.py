"""
Main init function for lqgraph
"""

from . import graphnet, series, sysmodel, lifting, kalman, duality, team, simkit

from .config import LQGraphSettings, SynthesisOptions
from .exceptions import (DescriptionParseError, DimensionError, InstabilityError, LawViolationError, LQGraphError,
                         NonConvergenceError)
from .graphnet import AdjacencyMatrix, DelayMatrix
from .series import MatrixSeries
from .sysmodel import BlockSystem, ProblemKind, ProblemSpec
from .lifting import LiftedSystem, lift
from .kalman import FilterRealization, RiccatiResult
from .duality import ControllerRealization
from .team import TeamGainSchedule, TeamSystem, TeamWeight

from .extras import get_information
__version__ = get_information('version')
del get_information
