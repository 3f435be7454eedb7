"""Mission orchestration: pretraining, the online loop, sweeps, and reports."""

from .artifacts import PretrainArtifacts
from .config import PretrainConfig, RunConfig
from .engine import EvalReport, MissionEngine, run_mission
from .pretrain import pretrain
from .reporting import render_tables, write_figures, write_report
from .sweep import SweepConfig, default_policies, sweep

__all__ = [
    "EvalReport",
    "MissionEngine",
    "PretrainArtifacts",
    "PretrainConfig",
    "RunConfig",
    "SweepConfig",
    "default_policies",
    "pretrain",
    "render_tables",
    "run_mission",
    "sweep",
    "write_figures",
    "write_report",
]
