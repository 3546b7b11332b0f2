"""Off-policy actor-critic learners that accept authentic or continuous transitions alike."""

from ctrl.agents.common import bellman_target, polyak_update
from ctrl.agents.sac import SacAgent
from ctrl.agents.td3 import Td3Agent

ALGOS = {"sac": SacAgent, "td3": Td3Agent}

__all__ = ["ALGOS", "SacAgent", "Td3Agent", "bellman_target", "polyak_update"]
