"""Spatial iterated Prisoner's Dilemma with a master-slave collective strategy."""

from csmsm.ipd_core import CANONICAL, MatchResult, Move, PayoffError, PayoffValues, play_match, stage_payoff, validate_payoffs
from csmsm.strategies import Phenotype, Role, StrategyKind, StrategyMachine, make_machine

__all__ = [
    "CANONICAL",
    "MatchResult",
    "Move",
    "PayoffError",
    "PayoffValues",
    "Phenotype",
    "Role",
    "StrategyKind",
    "StrategyMachine",
    "make_machine",
    "play_match",
    "stage_payoff",
    "validate_payoffs",
]
