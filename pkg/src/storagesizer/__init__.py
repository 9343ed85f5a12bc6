"""Joint sizing and receding-horizon dispatch of building ice storage and batteries."""

from .assets import Assets
from .dispatch import DispatchTrace, baseline_dispatch, build_dispatch_problem, run_mpc
from .energy_models import BesSpec, ChillerCurves, ChillerSpec, OperatingPoint, PiecewiseLinear, TesSpec
from .plant import ControlAction, PlantSim, plant_step
from .profiles import ProfileSet, SynthTemplate, load_profiles, synth_profiles
from .sizing import SizingConfig, SizingResult, present_worth_factor, solve_sizing
from .tariff import BillingResult, Tariff, TouPeriod, compute_bill

__version__ = "0.1.0"

__all__ = [
    "Assets", "BesSpec", "BillingResult", "ChillerCurves", "ChillerSpec", "ControlAction", "DispatchTrace",
    "OperatingPoint", "PiecewiseLinear", "PlantSim", "ProfileSet", "SizingConfig", "SizingResult",
    "SynthTemplate", "Tariff", "TesSpec", "TouPeriod", "baseline_dispatch", "build_dispatch_problem",
    "compute_bill", "load_profiles", "plant_step", "present_worth_factor", "run_mpc", "solve_sizing",
    "synth_profiles",
]
