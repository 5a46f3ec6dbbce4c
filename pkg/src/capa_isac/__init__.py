"""Optimal waveform design for continuous-aperture-array ISAC transmitters."""
__version__ = "0.1.0"

from .config import ScenarioConfig, default_config, load_scenario
from .core import IsacSolution, Scenario, solve
from .em import ApertureGeometry, Direction, Medium, User
from .evaluation import BerSetup, beam_gain, beampattern, constellation, ismr, simulate_ber
from .quadrature import QuadratureRule, gauss_legendre_rule
from .reference import ReferenceDesign, TargetSet, design_reference
from .spda import discretize, spda_solve
from .wavenumber import TruncationOrder, WaveformExpansion

__all__ = [
    "ApertureGeometry", "BerSetup", "Direction", "IsacSolution", "Medium", "QuadratureRule", "ReferenceDesign",
    "Scenario", "ScenarioConfig", "TargetSet", "TruncationOrder", "User", "WaveformExpansion",
    "beam_gain", "beampattern", "constellation", "default_config", "design_reference", "discretize",
    "gauss_legendre_rule", "ismr", "load_scenario", "simulate_ber", "solve", "spda_solve",
]
