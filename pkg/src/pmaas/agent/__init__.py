"""Device-agent simulator: scheduled sensor sampling, a durable disk cache,
and the three-phase platform interaction with disconnect-tolerant replay."""

from pmaas.agent.channel import (
    ChannelClosed,
    ConnectError,
    FaultInjector,
    FaultKind,
    InProcessConnector,
)
from pmaas.agent.config import AgentConfig, SensorSpec, load_agent_config
from pmaas.agent.runner import Agent, AgentError

__all__ = [
    "Agent",
    "AgentConfig",
    "AgentError",
    "ChannelClosed",
    "ConnectError",
    "FaultInjector",
    "FaultKind",
    "InProcessConnector",
    "SensorSpec",
    "load_agent_config",
]
