"""Vectorised match kernel: many independent matches advanced in lockstep.

The lattice uses this for matches that cannot be memoised (anything
involving RANDOM). Each row of the input arrays is one match. Moves are
booleans with ``True`` meaning defect. Behaviour mirrors the scalar machines
in :mod:`csmsm.strategies` exactly; the test-suite checks the two against each
other.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from csmsm.ipd_core import PayoffValues
from csmsm.strategies import ADAPTIVE_PREFIX, HANDSHAKE, Move, Phenotype

_HS = np.array([m is Move.D for m in HANDSHAKE])
_PREFIX = np.array([m is Move.D for m in ADAPTIVE_PREFIX])


class _Side:
    def __init__(self, codes: np.ndarray, bits: Optional[np.ndarray], dtype) -> None:
        n = codes.shape[0]
        self.codes = codes
        self.bits = bits
        self.opp_last = np.zeros(n, bool)
        self.opp_prev = np.zeros(n, bool)
        self.grim = np.zeros(n, bool)
        self.master_trig = np.zeros(n, bool)
        self.punish = np.zeros(n, bool)
        self.opp6 = np.zeros(n, bool)
        self.sum_c = np.zeros(n, dtype)
        self.sum_d = np.zeros(n, dtype)
        self.cnt_c = np.zeros(n, np.int64)
        self.cnt_d = np.zeros(n, np.int64)
        self.total = np.zeros(n, dtype)
        self.is_ = {ph: codes == ph for ph in Phenotype}
        if self.is_[Phenotype.RANDOM].any() and bits is None:
            raise ValueError("RANDOM players need pre-drawn move bits")

    def choose(self, r: int) -> np.ndarray:
        """Moves for round ``r`` (1-based)."""
        ph = self.is_
        move = ph[Phenotype.ALLD].copy()
        if self.bits is not None:
            move |= ph[Phenotype.RANDOM] & self.bits[:, r - 1].astype(bool)
        if r > 1:
            move |= ph[Phenotype.TFT] & self.opp_last
        move |= ph[Phenotype.TFTT] & self.opp_last & self.opp_prev
        move |= ph[Phenotype.GRIM] & self.grim

        if r <= len(_PREFIX):
            adaptive = np.full(move.shape, _PREFIX[r - 1])
        else:
            adaptive = np.where(
                self.cnt_d == 0,
                False,
                np.where(self.cnt_c == 0, True, self.sum_d * self.cnt_c > self.sum_c * self.cnt_d),
            )
        move |= ph[Phenotype.ADAPTIVE] & adaptive

        if r <= len(_HS):
            csmsm = np.full(move.shape, _HS[r - 1])
            master = slave = csmsm
        else:
            master = self.master_trig
            if r == 6:
                slave = np.ones(move.shape, bool)
            else:
                slave = self.opp6 & ~self.opp_last
        master = master | self.punish
        slave = slave | self.punish
        move |= ph[Phenotype.MASTER] & master
        move |= ph[Phenotype.SLAVE] & slave
        return move

    def update(self, r: int, own: np.ndarray, opp: np.ndarray, pay: np.ndarray) -> None:
        self.total += pay
        self.grim |= opp
        if r <= len(_HS):
            self.punish |= opp != _HS[r - 1]
        else:
            self.master_trig |= opp
        if r == 6:
            self.opp6 = opp.copy()
        self.sum_d += np.where(own, pay, 0)
        self.sum_c += np.where(own, 0, pay)
        self.cnt_d += own
        self.cnt_c += ~own
        self.opp_prev = self.opp_last
        self.opp_last = opp


def payoff_dtype(p: PayoffValues):
    return np.int64 if p.is_integral else np.float64


def play_batch(
    codes_a: np.ndarray,
    codes_b: np.ndarray,
    rounds: int,
    p: PayoffValues,
    bits_a: Optional[np.ndarray] = None,
    bits_b: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Totals for matches ``codes_a[i]`` vs ``codes_b[i]``.

    ``bits_*`` have shape ``(len(codes), rounds)``; nonzero entries are
    defections of a RANDOM player on that side (ignored for other players).
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    codes_a = np.asarray(codes_a)
    codes_b = np.asarray(codes_b)
    dtype = payoff_dtype(p)
    T, R, P, S = (dtype(v) for v in p.as_tuple())
    a = _Side(codes_a, bits_a, dtype)
    b = _Side(codes_b, bits_b, dtype)
    for r in range(1, rounds + 1):
        ma = a.choose(r)
        mb = b.choose(r)
        pay_a = np.where(ma, np.where(mb, P, T), np.where(mb, S, R))
        pay_b = np.where(mb, np.where(ma, P, T), np.where(ma, S, R))
        a.update(r, ma, mb, pay_a)
        b.update(r, mb, ma, pay_b)
    return a.total, b.total
