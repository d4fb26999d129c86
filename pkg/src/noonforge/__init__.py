"""Simulation of heralded two-photon N00N states shared across a lossy channel.

Modules cover the truncated Fock-space core, linear-optical elements, click
detection and heralding, homodyne statistics, maximum-likelihood tomography,
cat-state fitting, and a scenario runner with a command-line interface.
"""

from .cat_engineering import CssFitter, CssParams, WignerGrid, best_css_fit, squeezed_css_state, wigner
from .config import ScenarioConfig, load_config
from .errors import ConfigError, NoonforgeError, NumericalGuardError
from .fock_core import DensityOp, FockKet, KrausChannel, fidelity, partial_trace
from .heralding import DetectorModel, HeraldOutcome, herald_noon, noon_ket
from .homodyne import QuadratureDataset, QuadratureSetting, joint_moment, remote_condition, sample_homodyne
from .optical_circuit import DistinguishabilityModel, SourceParams, beam_splitter, loss_channel
from .scenarios import run_scenario
from .tomography import MaxLikTomography, TomographySettings, bootstrap_errors, maxlik_reconstruct

__all__ = [
    "ConfigError",
    "CssFitter",
    "CssParams",
    "DensityOp",
    "DetectorModel",
    "DistinguishabilityModel",
    "FockKet",
    "HeraldOutcome",
    "KrausChannel",
    "MaxLikTomography",
    "NoonforgeError",
    "NumericalGuardError",
    "QuadratureDataset",
    "QuadratureSetting",
    "ScenarioConfig",
    "SourceParams",
    "TomographySettings",
    "WignerGrid",
    "beam_splitter",
    "best_css_fit",
    "bootstrap_errors",
    "fidelity",
    "herald_noon",
    "joint_moment",
    "load_config",
    "loss_channel",
    "maxlik_reconstruct",
    "noon_ket",
    "partial_trace",
    "remote_condition",
    "run_scenario",
    "sample_homodyne",
    "squeezed_css_state",
    "wigner",
]
