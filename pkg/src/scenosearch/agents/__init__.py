"""Driving agents: unified interface, builtins, and the external bridge."""

from .base import (AGENT_KINDS, Agent, AgentAction, AgentContext, Observation,
                   VisibleLight, parse_agent_ref, register_agent, run_step, setup_env)
from .builtin import NaiveFollower, SafeFollower, YieldingAgent
from .control import IdmParams, idm_acceleration, lookahead_for, pure_pursuit

__all__ = [
    "AGENT_KINDS", "Agent", "AgentAction", "AgentContext", "Observation",
    "VisibleLight", "IdmParams", "NaiveFollower", "SafeFollower", "YieldingAgent",
    "idm_acceleration", "lookahead_for", "parse_agent_ref", "pure_pursuit",
    "register_agent", "run_step", "setup_env",
]
