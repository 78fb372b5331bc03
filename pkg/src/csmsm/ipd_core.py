"""Prisoner's Dilemma stage game and the n-round match engine."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from csmsm.strategies import StrategyMachine


class Move(str, enum.Enum):
    C = "C"
    D = "D"

    def __str__(self) -> str:
        return self.value


class PayoffError(ValueError):
    """Raised when a payoff matrix is not a valid Prisoner's Dilemma."""


@dataclass(frozen=True)
class PayoffValues:
    """Stage-game payoffs: temptation, reward, punishment, sucker."""

    T: float = 5
    R: float = 3
    P: float = 1
    S: float = 0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.T, self.R, self.P, self.S)

    @property
    def is_integral(self) -> bool:
        return all(float(v).is_integer() for v in self.as_tuple())

    @classmethod
    def parse(cls, text: str) -> "PayoffValues":
        """Parse ``"T,R,P,S"``; integer-looking fields stay ints."""
        parts = [s.strip() for s in text.split(",")]
        if len(parts) != 4:
            raise PayoffError(f"expected four comma-separated payoffs T,R,P,S, got {text!r}")
        vals = []
        for s in parts:
            try:
                vals.append(int(s))
            except ValueError:
                try:
                    vals.append(float(s))
                except ValueError:
                    raise PayoffError(f"payoff {s!r} is not a number") from None
        return cls(*vals)


CANONICAL = PayoffValues(5, 3, 1, 0)


def validate_payoffs(p: PayoffValues) -> PayoffValues:
    T, R, P, S = p.as_tuple()
    for name, v in zip("TRPS", (T, R, P, S)):
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise PayoffError(f"payoff {name}={v!r} is not a finite real")
    if not T > R:
        raise PayoffError(f"T > R violated (T={T}, R={R})")
    if not R > P:
        raise PayoffError(f"R > P violated (R={R}, P={P})")
    if not P > S:
        raise PayoffError(f"P > S violated (P={P}, S={S})")
    # compared doubled to stay exact for integer inputs
    if not 2 * R > S + T:
        raise PayoffError(f"R > (S + T)/2 violated (R={R}, (S+T)/2={(S + T) / 2})")
    return p


def stage_payoff(move_a: Move, move_b: Move, p: PayoffValues) -> tuple[float, float]:
    if move_a is Move.C:
        return (p.R, p.R) if move_b is Move.C else (p.S, p.T)
    return (p.T, p.S) if move_b is Move.C else (p.P, p.P)


@dataclass(frozen=True)
class MatchResult:
    payoff_a: float
    payoff_b: float
    history_a: tuple[Move, ...]
    history_b: tuple[Move, ...]
    rounds: int

    def mirrored(self) -> "MatchResult":
        return MatchResult(self.payoff_b, self.payoff_a, self.history_b, self.history_a, self.rounds)


def play_match(
    a: StrategyMachine,
    b: StrategyMachine,
    rounds: int,
    p: PayoffValues = CANONICAL,
    *,
    min_rounds: int = 1,
) -> MatchResult:
    """Play ``rounds`` simultaneous-move rounds between two fresh machines.

    Each round both machines commit a move before either observes the other's.
    ``min_rounds`` lets callers that rely on the closed-form payoffs insist on
    n >= 7.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if rounds < min_rounds:
        raise ValueError(f"rounds={rounds} below the configured floor {min_rounds}")
    if a is b:
        raise ValueError("a machine cannot play against itself")
    if a.rounds_played or b.rounds_played:
        raise RuntimeError("play_match needs freshly reset machines")

    table = {
        (Move.C, Move.C): (p.R, p.R),
        (Move.C, Move.D): (p.S, p.T),
        (Move.D, Move.C): (p.T, p.S),
        (Move.D, Move.D): (p.P, p.P),
    }
    hist_a: list[Move] = []
    hist_b: list[Move] = []
    total_a = 0
    total_b = 0
    # the loop enforces alternation itself, so skip the public guards
    choose_a, choose_b, update_a, update_b = a._choose, b._choose, a._update, b._update
    for r in range(1, rounds + 1):
        ma = choose_a()
        mb = choose_b()
        a.rounds_played = b.rounds_played = r
        update_a(ma, mb)
        update_b(mb, ma)
        pa, pb = table[ma, mb]
        total_a += pa
        total_b += pb
        hist_a.append(ma)
        hist_b.append(mb)
    return MatchResult(total_a, total_b, tuple(hist_a), tuple(hist_b), rounds)
