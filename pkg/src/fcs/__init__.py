"""Constrained PI servo-control toolkit.

Offline synthesis of LQR PI gains and min-norm constraint augmentation,
fixed-step closed-loop simulation, and plant-input stability margins for
any constraint-activity pattern.
"""

from .config import Study, StudyConfig, build_study, load_config
from .controller import ControllerMode, ControlLaw
from .design import PolynomialSpec, build_sensitivities, lqr_pi_design
from .errors import FcsError
from .margins import DeltaPattern, build_loop_model, mimo_margins, saturation_margins
from .model import ConstraintBox, Plant, ServoGains, build_extended
from .simulate import CommandSchedule, SimConfig, analyze, run

__all__ = [
    "CommandSchedule", "ConstraintBox", "ControlLaw", "ControllerMode", "DeltaPattern",
    "FcsError", "Plant", "PolynomialSpec", "ServoGains", "SimConfig", "Study", "StudyConfig",
    "analyze", "build_extended", "build_loop_model", "build_sensitivities", "build_study",
    "load_config", "lqr_pi_design", "mimo_margins", "run", "saturation_margins",
]
