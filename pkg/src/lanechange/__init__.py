"""Lane-change path planning over a road grid with layered Markov risk models."""
from .grid import Action, GridPosition, RoadGrid, action_between, apply_action, segment_length
from .markov import LayeredVehicleModel, SpeedRange, StochasticMatrix, speed_bin
from .paths import Path, PathSet, enumerate_paths, length_reward, path_length
from .crash import EgoState, VehicleSpec, crash_probability, waypoint_risk
from .reward import PathEvaluation, cumulative_reward, select_best_path, waypoint_reward
from .scenario import PlanResult, Scenario, load_scenario, parse_scenario, run_scenario

__version__ = "0.1.0"
