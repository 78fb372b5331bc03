"""Strategy state machines: CSMSM plus the classic opponent roster.

Every machine follows the same two-phase protocol per round: ``next_move()``
commits a move, then ``observe(opp)`` reveals the opponent's move for that
round. The two calls must strictly alternate.
"""

from __future__ import annotations

import enum
from typing import Any, Iterable, Iterator, Optional

from csmsm.ipd_core import CANONICAL, Move, PayoffValues, stage_payoff

C, D = Move.C, Move.D

HANDSHAKE: tuple[Move, ...] = (C, D, C, C, D)
ADAPTIVE_PREFIX: tuple[Move, ...] = (C,) * 6 + (D,) * 4


class StrategyKind(str, enum.Enum):
    CSMSM = "CSMSM"
    TFT = "TFT"
    TFTT = "TFTT"
    GRIM = "GRIM"
    ALLC = "ALLC"
    ALLD = "ALLD"
    RANDOM = "RANDOM"
    ADAPTIVE = "ADAPTIVE"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, token: str) -> "StrategyKind":
        try:
            return cls(token.strip().upper())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown strategy {token!r}; valid tokens: {valid}") from None


class Role(str, enum.Enum):
    MASTER = "MASTER"
    SLAVE = "SLAVE"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, token: str) -> "Role":
        try:
            return cls(token.strip().upper())
        except ValueError:
            raise ValueError(f"unknown role {token!r}; valid roles: MASTER, SLAVE") from None


class Phenotype(enum.IntEnum):
    """Kind plus CSMSM role: what a lattice cell actually plays.

    The integer values are the cell codes used by the lattice arrays; ``char``
    is the one-letter snapshot symbol.
    """

    MASTER = 0
    SLAVE = 1
    TFT = 2
    TFTT = 3
    GRIM = 4
    ALLC = 5
    ALLD = 6
    RANDOM = 7
    ADAPTIVE = 8

    @property
    def kind(self) -> StrategyKind:
        if self in (Phenotype.MASTER, Phenotype.SLAVE):
            return StrategyKind.CSMSM
        return StrategyKind(self.name)

    @property
    def role(self) -> Optional[Role]:
        if self is Phenotype.MASTER:
            return Role.MASTER
        if self is Phenotype.SLAVE:
            return Role.SLAVE
        return None

    @property
    def char(self) -> str:
        return _CHARS[self]

    @classmethod
    def of(cls, kind: StrategyKind | str, role: Role | str | None = None) -> "Phenotype":
        kind = StrategyKind.parse(kind) if isinstance(kind, str) else StrategyKind(kind)
        if kind is StrategyKind.CSMSM:
            if role is None:
                raise ValueError("CSMSM needs a role")
            return cls[Role.parse(role).value if isinstance(role, str) else Role(role).value]
        if role is not None:
            raise ValueError(f"role is only meaningful for CSMSM, not {kind}")
        return cls[kind.value]

    @classmethod
    def parse(cls, token: str) -> "Phenotype":
        """``KIND``, ``CSMSM:ROLE``, ``MASTER`` or ``SLAVE``."""
        t = token.strip().upper()
        if t in ("MASTER", "SLAVE"):
            return cls[t]
        return cls.of(*parse_player(t))

    @classmethod
    def from_char(cls, ch: str) -> "Phenotype":
        try:
            return _FROM_CHAR[ch]
        except KeyError:
            raise ValueError(f"unknown snapshot symbol {ch!r}") from None


_CHARS = dict(zip(Phenotype, "MmTtGCDRA"))
_FROM_CHAR = {c: ph for ph, c in _CHARS.items()}


class ProtocolError(RuntimeError):
    """next_move/observe called out of order."""


class StrategyMachine:
    """Base class; subclasses implement ``_choose`` and ``_update``."""

    kind: StrategyKind

    def __init__(self) -> None:
        self.role: Optional[Role] = None
        self.reset()

    def reset(self) -> None:
        self.rounds_played = 0
        self._pending: Optional[Move] = None
        self._reset_state()

    def _reset_state(self) -> None:
        pass

    def next_move(self) -> Move:
        if self._pending is not None:
            raise ProtocolError("next_move called twice without observe")
        move = self._choose()
        self._pending = move
        return move

    def observe(self, opp: Move) -> None:
        own = self._pending
        if own is None:
            raise ProtocolError("observe called before next_move")
        self._pending = None
        self.rounds_played += 1
        self._update(own, opp if opp.__class__ is Move else Move(opp))

    def _choose(self) -> Move:
        raise NotImplementedError

    def _update(self, own: Move, opp: Move) -> None:
        pass

    def __repr__(self) -> str:
        role = f":{self.role}" if self.role is not None else ""
        return f"<{type(self).__name__} {self.kind}{role} round={self.rounds_played}>"


class AllC(StrategyMachine):
    kind = StrategyKind.ALLC

    def _choose(self) -> Move:
        return C


class AllD(StrategyMachine):
    kind = StrategyKind.ALLD

    def _choose(self) -> Move:
        return D


class RandomPlayer(StrategyMachine):
    """Cooperates with probability 1/2 each round.

    ``stream`` is either a generator-like object exposing ``random()`` or an
    iterable of moves (``Move`` or ``"C"``/``"D"``), which lets callers replay
    pre-drawn move sequences.
    """

    kind = StrategyKind.RANDOM

    def __init__(self, stream: Any) -> None:
        if hasattr(stream, "random"):
            self._draw = lambda: C if stream.random() < 0.5 else D
        else:
            it: Iterator = iter(stream)
            self._draw = lambda: Move(next(it))
        super().__init__()

    def _choose(self) -> Move:
        return self._draw()


class TitForTat(StrategyMachine):
    kind = StrategyKind.TFT

    def _reset_state(self) -> None:
        self._last = C

    def _choose(self) -> Move:
        return self._last

    def _update(self, own: Move, opp: Move) -> None:
        self._last = opp


class TitForTwoTats(StrategyMachine):
    kind = StrategyKind.TFTT

    def _reset_state(self) -> None:
        self._prev = C
        self._last = C

    def _choose(self) -> Move:
        return D if (self._prev is D and self._last is D) else C

    def _update(self, own: Move, opp: Move) -> None:
        self._prev, self._last = self._last, opp


class Grim(StrategyMachine):
    kind = StrategyKind.GRIM

    def _reset_state(self) -> None:
        self.triggered = False

    def _choose(self) -> Move:
        return D if self.triggered else C

    def _update(self, own: Move, opp: Move) -> None:
        if opp is D:
            self.triggered = True


class Adaptive(StrategyMachine):
    """Scripted ten-move opening, then the move with the best average payoff.

    Averages are over this player's own per-round payoffs in the current
    match, grouped by its own move. Ties go to C.
    """

    kind = StrategyKind.ADAPTIVE

    def __init__(self, payoffs: PayoffValues = CANONICAL) -> None:
        self.payoffs = payoffs
        super().__init__()

    def _reset_state(self) -> None:
        self.totals = {C: 0, D: 0}
        self.counts = {C: 0, D: 0}

    def _choose(self) -> Move:
        k = self.rounds_played
        if k < len(ADAPTIVE_PREFIX):
            return ADAPTIVE_PREFIX[k]
        nc, nd = self.counts[C], self.counts[D]
        if nd == 0:
            return C
        if nc == 0:
            return D
        # cross-multiplied so integer payoffs compare exactly
        return D if self.totals[D] * nc > self.totals[C] * nd else C

    def _update(self, own: Move, opp: Move) -> None:
        self.totals[own] += stage_payoff(own, opp, self.payoffs)[0]
        self.counts[own] += 1


class CSMSMPhase(str, enum.Enum):
    HANDSHAKE = "HANDSHAKE"
    PUNISH = "PUNISH"
    RECOGNIZED = "RECOGNIZED"


class CSMSMMachine(StrategyMachine):
    """Handshake on C,D,C,C,D, defect forever against non-kin.

    After recognition a master plays grim trigger from round 6 on (scripted
    handshake defections do not count). A slave defects at round 6; then it
    cooperates for good if the partner cooperated at round 6 (a master), and
    otherwise plays the reverse of the partner's previous move.
    """

    kind = StrategyKind.CSMSM

    def __init__(self, role: Role) -> None:
        super().__init__()
        self.role = Role(role)

    def _reset_state(self) -> None:
        self.phase = CSMSMPhase.HANDSHAKE
        self.triggered = False
        self._partner_round6: Optional[Move] = None
        self._last_opp: Optional[Move] = None

    def _choose(self) -> Move:
        r = self.rounds_played + 1
        if self.phase is CSMSMPhase.PUNISH:
            return D
        if r <= len(HANDSHAKE):
            return HANDSHAKE[r - 1]
        if self.role is Role.MASTER:
            return D if self.triggered else C
        if r == 6:
            return D
        if self._partner_round6 is C:
            return C
        return C if self._last_opp is D else D

    def _update(self, own: Move, opp: Move) -> None:
        r = self.rounds_played
        self._last_opp = opp
        if self.phase is CSMSMPhase.PUNISH:
            return
        if r <= len(HANDSHAKE):
            if opp is not HANDSHAKE[r - 1]:
                self.phase = CSMSMPhase.PUNISH
            elif r == len(HANDSHAKE):
                self.phase = CSMSMPhase.RECOGNIZED
            return
        if r == 6:
            self._partner_round6 = opp
        if opp is D:
            self.triggered = True


_SIMPLE = {
    StrategyKind.ALLC: AllC,
    StrategyKind.ALLD: AllD,
    StrategyKind.TFT: TitForTat,
    StrategyKind.TFTT: TitForTwoTats,
    StrategyKind.GRIM: Grim,
}

DETERMINISTIC_KINDS: tuple[StrategyKind, ...] = tuple(k for k in StrategyKind if k is not StrategyKind.RANDOM)


def make_machine(
    kind: StrategyKind | str,
    role: Role | str | None = None,
    rng_stream: Any = None,
    *,
    payoffs: PayoffValues = CANONICAL,
) -> StrategyMachine:
    """Build a machine in its round-0 state.

    ``role`` is required for CSMSM and forbidden otherwise; ``rng_stream`` is
    required for RANDOM and forbidden otherwise. ``payoffs`` only matters for
    ADAPTIVE, which scores its own moves.
    """
    kind = StrategyKind.parse(kind) if isinstance(kind, str) else StrategyKind(kind)
    if kind is StrategyKind.CSMSM:
        if role is None:
            raise ValueError("CSMSM machines need a role (MASTER or SLAVE)")
    elif role is not None:
        raise ValueError(f"role is only meaningful for CSMSM, not {kind}")
    if kind is StrategyKind.RANDOM:
        if rng_stream is None:
            raise ValueError("RANDOM machines need an rng_stream")
    elif rng_stream is not None:
        raise ValueError(f"{kind} is deterministic and takes no rng_stream")

    if kind is StrategyKind.CSMSM:
        return CSMSMMachine(Role.parse(role) if isinstance(role, str) else role)
    if kind is StrategyKind.RANDOM:
        return RandomPlayer(rng_stream)
    if kind is StrategyKind.ADAPTIVE:
        return Adaptive(payoffs)
    return _SIMPLE[kind]()


def parse_player(token: str) -> tuple[StrategyKind, Optional[Role]]:
    """Parse ``KIND`` or ``CSMSM:ROLE`` (a bare CSMSM means MASTER)."""
    kind_s, _, role_s = token.partition(":")
    kind = StrategyKind.parse(kind_s)
    if role_s:
        if kind is not StrategyKind.CSMSM:
            raise ValueError(f"role given for non-CSMSM strategy {kind}")
        return kind, Role.parse(role_s)
    return kind, (Role.MASTER if kind is StrategyKind.CSMSM else None)


def moves_from_bits(bits: Iterable[int]) -> list[Move]:
    """Map 0/1 bits to C/D; used to replay pre-drawn RANDOM streams."""
    return [D if b else C for b in bits]
