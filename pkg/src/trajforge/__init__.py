"""Reasoning-trajectory curation for web agents."""

from .backends import BackendConfig, Completion, RemoteBackend, ScriptedBackend, make_backend
from .curate import CurationDataset, cumulative_union, export_sft
from .env import SimulatedWeb, SiteSpec
from .model import (
    Click,
    GoBack,
    Observation,
    QueryRecord,
    Restart,
    Scroll,
    Step,
    Stop,
    Thought,
    Trajectory,
    Type,
)
from .protocol import parse_action, parse_agent_reply, render_action

__all__ = [
    "BackendConfig",
    "Click",
    "Completion",
    "CurationDataset",
    "GoBack",
    "Observation",
    "QueryRecord",
    "RemoteBackend",
    "Restart",
    "ScriptedBackend",
    "Scroll",
    "SimulatedWeb",
    "SiteSpec",
    "Step",
    "Stop",
    "Thought",
    "Trajectory",
    "Type",
    "cumulative_union",
    "export_sft",
    "make_backend",
    "parse_action",
    "parse_agent_reply",
    "render_action",
]
__version__ = "0.1.0"
