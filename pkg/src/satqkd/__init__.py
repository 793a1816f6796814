"""Desk-scale simulator of entanglement-based satellite-to-ground QKD.

Pipeline: SPDC pair-source statistics -> truncated-Gaussian free-space
channel with pointing jitter and beam-waist optimization -> received-state
fidelity and QBER -> secret key rate with Cascade-based extraction
efficiency -> per-pass and per-campaign key-material reports.
"""

__version__ = "0.1.0"

from .atmosphere import AtmosphereParams, WeatherRealization
from .campaign import CampaignSummary, PassRecord, run_campaign, use_case_verdict
from .config import ScenarioConfig, load_config
from .extraction import AnalyticXi, KeyRateResult, LutTable
from .fidelity import ChannelBudget, FidelityBreakdown
from .optics import BeamChannel, CaptureMap, CapturePdf, IntensityField
from .orbit import GroundStation, OrbitConfig, PassWindow
from .source import FockAmplitudes, SourceParams

__all__ = [
    "__version__",
    "AtmosphereParams", "WeatherRealization",
    "CampaignSummary", "PassRecord", "run_campaign", "use_case_verdict",
    "ScenarioConfig", "load_config",
    "AnalyticXi", "KeyRateResult", "LutTable",
    "ChannelBudget", "FidelityBreakdown",
    "BeamChannel", "CaptureMap", "CapturePdf", "IntensityField",
    "GroundStation", "OrbitConfig", "PassWindow",
    "FockAmplitudes", "SourceParams",
]
