"""Closed-form match payoffs and cluster invasion thresholds.

Covers the four behaviours whose pairwise totals have closed forms: TFT, ALLD
and the two CSMSM roles. Everything is exact for integer payoffs; thresholds
are carried as :class:`fractions.Fraction`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from csmsm.ipd_core import PayoffValues, validate_payoffs
from csmsm.strategies import Phenotype

COVERED = (Phenotype.TFT, Phenotype.ALLD, Phenotype.MASTER, Phenotype.SLAVE)
MIN_ROUNDS = 7


class UncoveredPairError(KeyError):
    """No closed form for this pairing; use play_match instead."""


def _check_n(n: int) -> None:
    if n < MIN_ROUNDS:
        raise ValueError(f"closed forms need n >= {MIN_ROUNDS}, got {n}")


def _pheno(x) -> Phenotype:
    if isinstance(x, Phenotype):
        return x
    if isinstance(x, tuple):
        return Phenotype.of(*x)
    return Phenotype.parse(str(x))


def _slave_vs_slave(n: int, p: PayoffValues):
    # handshake, then P,R,P,R,... from round 6; equals (nR + nP)/2 for even n
    tail = n - 5
    return (3 + tail // 2) * p.R + (2 + (tail + 1) // 2) * p.P


def pair_payoff(a, b, n: int, p: PayoffValues):
    """Total payoff of ``a`` in an n-round match against ``b``."""
    _check_n(n)
    a, b = _pheno(a), _pheno(b)
    if a not in COVERED or b not in COVERED:
        raise UncoveredPairError(
            f"no closed form for {a.name} vs {b.name}; simulate it with play_match"
        )
    T, R, P, S = p.T, p.R, p.P, p.S
    a_csmsm = a in (Phenotype.MASTER, Phenotype.SLAVE)
    b_csmsm = b in (Phenotype.MASTER, Phenotype.SLAVE)
    if a is Phenotype.TFT:
        if b is Phenotype.TFT:
            return n * R
        if b is Phenotype.ALLD:
            return S + (n - 1) * P
        return R + (n - 2) * P + S
    if a is Phenotype.ALLD:
        if b is Phenotype.TFT:
            return T + (n - 1) * P
        if b is Phenotype.ALLD:
            return n * P
        return T + (n - 1) * P
    assert a_csmsm
    if b is Phenotype.TFT:
        return T + R + (n - 2) * P
    if b is Phenotype.ALLD:
        return (n - 1) * P + S
    assert b_csmsm
    if a is Phenotype.MASTER:
        if b is Phenotype.MASTER:
            return (n - 2) * R + 2 * P
        return (n - 6) * T + 3 * R + 2 * P + S
    if b is Phenotype.MASTER:
        return T + 3 * R + 2 * P + (n - 6) * S
    return _slave_vs_slave(n, p)


def tft_payoff(k: int, n: int, p: PayoffValues):
    """TFT surrounded by ``k`` CSMSM and ``8 - k`` TFT neighbours."""
    if not 0 <= k <= 3:
        raise ValueError(f"TFT CSMSM-neighbour count must be in 0..3, got {k}")
    _check_n(n)
    return (8 - k) * n * p.R + k * (p.R + (n - 2) * p.P + p.S)


def alld_payoff(k: int, n: int, p: PayoffValues):
    """AllD surrounded by ``k`` CSMSM and ``8 - k`` AllD neighbours."""
    if not 0 <= k <= 2:
        raise ValueError(f"AllD CSMSM-neighbour count must be in 0..2, got {k}")
    _check_n(n)
    return (8 - k) * n * p.P + k * (p.T + (n - 1) * p.P)


# position -> (CSMSM neighbours, TFT neighbours)
_POSITIONS = {"CENTER": (8, 0), "BORDER": (5, 3), "CORNER": (3, 5)}


def master_payoff(position: str, slave_count: int, n: int, p: PayoffValues):
    """Master in a 3x3 cluster inside a TFT sea.

    CENTER has 8 CSMSM neighbours, BORDER 5 (plus 3 TFT), CORNER 3 (plus 5 TFT);
    ``slave_count`` of the CSMSM neighbours are slaves, the rest masters.
    """
    position = position.upper()
    if position not in _POSITIONS:
        raise ValueError(f"position must be one of {sorted(_POSITIONS)}, got {position!r}")
    kin, tft = _POSITIONS[position]
    if not 0 <= slave_count <= kin:
        raise ValueError(f"{position} slave count must be in 0..{kin}, got {slave_count}")
    vs_slave = pair_payoff(Phenotype.MASTER, Phenotype.SLAVE, n, p)
    vs_master = pair_payoff(Phenotype.MASTER, Phenotype.MASTER, n, p)
    vs_tft = pair_payoff(Phenotype.MASTER, Phenotype.TFT, n, p)
    return slave_count * vs_slave + (kin - slave_count) * vs_master + tft * vs_tft


def alld_pair_master_payoff(partner: Phenotype, n: int, p: PayoffValues):
    """A CSMSM master with one CSMSM partner and seven AllD neighbours."""
    partner = _pheno(partner)
    return 7 * pair_payoff(Phenotype.MASTER, Phenotype.ALLD, n, p) + pair_payoff(Phenotype.MASTER, partner, n, p)


@dataclass
class ThresholdReport:
    n: int
    payoffs: PayoffValues
    eq1_n_star: Fraction
    eq2_l_star: Fraction
    eq3_l_star_simplified: Fraction
    eq4_interval: tuple[Fraction, Fraction]
    eq5_interval_simplified: tuple[Fraction, Fraction]
    eq6_n_star: Fraction
    verdicts: dict[str, str] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, str]]:
        def fmt(x: Fraction) -> str:
            return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)

        out = [
            ("n", str(self.n)),
            ("payoffs", ",".join(str(v) for v in self.payoffs.as_tuple())),
            ("eq1_n_star", fmt(self.eq1_n_star)),
            ("eq2_l_star", fmt(self.eq2_l_star)),
            ("eq3_l_star_simplified", fmt(self.eq3_l_star_simplified)),
            ("eq4_lower", fmt(self.eq4_interval[0])),
            ("eq4_upper", fmt(self.eq4_interval[1])),
            ("eq5_lower", fmt(self.eq5_interval_simplified[0])),
            ("eq5_upper", fmt(self.eq5_interval_simplified[1])),
            ("eq6_n_star", fmt(self.eq6_n_star)),
        ]
        out += [(f"verdict_{k}", v) for k, v in self.verdicts.items()]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        w.writerows(self.rows())
        return buf.getvalue()

    def to_text(self) -> str:
        def show(x: Fraction) -> str:
            if x.denominator == 1:
                return str(x.numerator)
            return f"{x.numerator}/{x.denominator} ≈ {float(x):.3f}"

        T, R, P, S = self.payoffs.as_tuple()
        lines = [
            f"Invasion thresholds for n={self.n}, T={T} R={R} P={P} S={S}",
            f"  centre master beats every TFT (all m):  n > {show(self.eq1_n_star)}",
            f"  border master grows the cluster:        l > {show(self.eq2_l_star)}",
            f"    large-n limit:                        l > {show(self.eq3_l_star_simplified)}",
            f"  border holds:                           {show(self.eq4_interval[0])} < l < {show(self.eq4_interval[1])}",
            f"    large-n limit:                        {show(self.eq5_interval_simplified[0])} < l < {show(self.eq5_interval_simplified[1])}",
            f"  master+slave pair invades AllD:         n > {show(self.eq6_n_star)}",
        ]
        if self.verdicts:
            lines.append("  verdicts:")
            lines += [f"    {k}: {v}" for k, v in self.verdicts.items()]
        return "\n".join(lines)


def _frac(x) -> Fraction:
    return Fraction(x)


def border_denominator(n: int, p: PayoffValues) -> Fraction:
    T, R, S = _frac(p.T), _frac(p.R), _frac(p.S)
    return n * (T - R) - 6 * T + 5 * R + S


def thresholds(
    n: int,
    p: PayoffValues,
    *,
    l: Optional[int] = None,
    m: Optional[int] = None,
    q: Optional[int] = None,
) -> ThresholdReport:
    """Evaluate all invasion bounds; add verdicts for whichever of l/m/q are given."""
    validate_payoffs(p)
    _check_n(n)
    T, R, P, S = (_frac(v) for v in p.as_tuple())
    den = border_denominator(n, p)
    if den == 0:
        raise ZeroDivisionError(
            "border-growth threshold is singular: its denominator n(T-R) - 6T + 5R + S is zero"
        )
    eq1 = (17 * R - 18 * P + S) / (R - P)
    eq2 = (3 * n * (R - P) - 3 * T + 7 * R - 4 * P) / den
    eq3 = 3 * (R - P) / (T - R)
    eq4 = ((2 * n * (R - P) - 3 * T + 8 * R - 6 * P + S) / den, eq2)
    eq5 = (2 * (R - P) / (T - R), eq3)
    # derived from 7((n-1)P+S) + (n-6)T+3R+2P+S > 8nP+2T-2P
    eq6 = (8 * T - 3 * R + 3 * P - 8 * S) / (T - P)

    report = ThresholdReport(n, p, eq1, eq2, eq3, eq4, eq5, eq6)
    v = report.verdicts
    if l is not None:
        if not 0 <= l <= 5:
            raise ValueError(f"l must be in 0..5, got {l}")
        # bounds are solved for l assuming a positive denominator
        above = (l > eq2) if den > 0 else (l < eq2)
        inside = (eq4[0] < l < eq4[1]) if den > 0 else (eq4[1] < l < eq4[0])
        v["border"] = "grow" if above else ("hold" if inside else "shrink")
    if m is not None:
        c0 = master_payoff("CENTER", m, n, p)
        v["center"] = "hold" if c0 > tft_payoff(1, n, p) else "shrink"
    if q is not None:
        c2 = master_payoff("CORNER", q, n, p)
        v["corner"] = "hold" if c2 > tft_payoff(2, n, p) else "shrink"
    v["alld_pair"] = "grow" if n > eq6 else "no-grow"
    return report
