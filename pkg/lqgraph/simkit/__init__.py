"""
Simulation, analytic costs and least-squares oracles.
"""

from .costs import analytic_cost, expand_node_weight
from .oracle import OracleSolution, estimator_cost, feedforward_oracle, structured_ls_oracle
from .simulate import (SimReport, draw_noise, innovation_whiteness, lifted_trajectory, simulate_closed_loop,
                       simulate_estimator, simulate_team, trial_streams)
