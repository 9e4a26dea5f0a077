"""Joint optimisation of cellular antenna tilt angles.

Library layout:

- :mod:`tiltopt.model`       scenario geometry, construction, association
- :mod:`tiltopt.radio`       gains, path loss, SINR, throughput
- :mod:`tiltopt.problems`    P1/P2 objectives, Lagrangians, subgradients
- :mod:`tiltopt.saddle`      generic primal-dual subgradient engine
- :mod:`tiltopt.distributed` per-sector message-passing execution
- :mod:`tiltopt.mmse`        SIMO/LMMSE evaluation layer
- :mod:`tiltopt.scenario_io` scenario file format
- :mod:`tiltopt.experiments` experiment runners
- :mod:`tiltopt.cli`         command-line entry point
"""

from .model import (BaseStationSector, Network, ScenarioError, UserEquipment,
                    build_hex_scenario, cluster_scenario, fairness_scenario,
                    urban_scenario)
from .problems import Multipliers, ProblemInstance, UtilitySpec, make_instance
from .saddle import IterationTrace, SaddleProblem, run as saddle_run

__version__ = "0.1.0"

__all__ = [
    "BaseStationSector", "Network", "ScenarioError", "UserEquipment",
    "build_hex_scenario", "cluster_scenario", "fairness_scenario",
    "urban_scenario",
    "Multipliers", "ProblemInstance", "UtilitySpec", "make_instance",
    "IterationTrace", "SaddleProblem", "saddle_run", "__version__",
]
