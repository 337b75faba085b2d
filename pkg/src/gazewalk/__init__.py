"""Stochastic gaze scan-path simulation on saliency landscapes."""

__version__ = "0.1.0"

from .errors import GazewalkError  # noqa: E402
from .stable import AlphaStableParams, fit_alpha_stable, sample_alpha_stable  # noqa: E402
from .saliency import ImageFrame, SaliencyMap, itti_saliency  # noqa: E402
from .walker import RegimeMotorParams, SaliencySource, WalkerConfig, run_scanpath  # noqa: E402

__all__ = [
    "AlphaStableParams", "GazewalkError", "ImageFrame", "RegimeMotorParams", "SaliencyMap",
    "SaliencySource", "WalkerConfig", "fit_alpha_stable", "itti_saliency", "run_scanpath",
    "sample_alpha_stable",
]
