"""Command-line front end: ``run``, ``match``, ``analyze`` and ``scenario``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from csmsm import analysis
from csmsm.ipd_core import CANONICAL, PayoffError, PayoffValues, play_match, stage_payoff, validate_payoffs
from csmsm.spatial import (
    KIND_ORDER,
    PAYOFF_GROUPS,
    GenerationStats,
    GridState,
    RngPolicy,
    RunResult,
    Scenario,
    ScenarioError,
    compute_stats,
    init_random,
    init_scenario,
    run,
)
from csmsm.strategies import Phenotype, StrategyKind, make_machine, parse_player

log = logging.getLogger("csmsm")

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    width: int = 200
    height: int = 200
    rounds: int = 50
    generations: int = 200
    payoffs: PayoffValues = CANONICAL
    mix: dict[StrategyKind, float] = field(
        default_factory=lambda: {StrategyKind.CSMSM: 0.5, StrategyKind.TFT: 0.5}
    )
    p_slave: float = 0.7
    seed: int = 0
    snapshot_every: int = 0
    workers: int = 1
    output_dir: Path = Path("out")
    freeze_roles: bool = False

    def validate(self) -> "RunConfig":
        if self.width < 3 or self.height < 3:
            raise UsageError(f"grid must be at least 3x3, got {self.width}x{self.height}")
        if self.rounds < 1:
            raise UsageError("rounds must be >= 1")
        if self.generations < 0:
            raise UsageError("generations must be >= 0")
        if not 0.0 <= self.p_slave <= 1.0:
            raise UsageError("p-slave must be in [0, 1]")
        if self.snapshot_every < 0:
            raise UsageError("snapshot-every must be >= 0")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        total = sum(self.mix.values())
        if any(f < 0 for f in self.mix.values()) or abs(total - 1.0) > 1e-9:
            raise UsageError(f"mix fractions must be nonnegative and sum to 1 (got {total})")
        try:
            validate_payoffs(self.payoffs)
        except PayoffError as e:
            raise UsageError(str(e)) from None
        return self


def parse_mix(text: str) -> dict[StrategyKind, float]:
    out: dict[StrategyKind, float] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        kind_s, sep, frac_s = item.partition(":")
        if not sep:
            raise UsageError(f"mix entry {item!r} must look like KIND:fraction")
        try:
            kind = StrategyKind.parse(kind_s)
            out[kind] = out.get(kind, 0.0) + float(frac_s)
        except ValueError as e:
            raise UsageError(str(e)) from None
    if not out:
        raise UsageError("empty mix")
    return out


def _parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


_CONVERTERS = {
    "width": int,
    "height": int,
    "rounds": int,
    "generations": int,
    "payoffs": PayoffValues.parse,
    "mix": parse_mix,
    "p_slave": float,
    "seed": int,
    "snapshot_every": int,
    "workers": int,
    "output_dir": Path,
    "freeze_roles": _parse_bool,
}
_ALIASES = {"out": "output_dir", "n": "rounds"}


def read_config_file(path: Path) -> dict:
    """``key = value`` lines; ``#`` comments; keys use - or _ interchangeably."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise OSError(f"cannot read config {path}: {e.strerror}") from None
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        key = _ALIASES.get(key, key)
        if key not in _CONVERTERS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        raw[key] = value.strip()
    return raw


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    kwargs = {}
    for key, v in values.items():
        if isinstance(v, str) or key == "output_dir":
            try:
                v = _CONVERTERS[key](v)
            except (ValueError, PayoffError) as e:
                raise UsageError(f"bad value for {key}: {e}") from None
        kwargs[key] = v
    return RunConfig(**kwargs).validate()


# -- output ---------------------------------------------------------------


def stats_header() -> list[str]:
    return (
        ["generation"]
        + [f"{k.value}_frac" for k in KIND_ORDER]
        + ["csmsm_master_frac", "csmsm_slave_frac"]
        + [f"{g}_avg_payoff_per_move" for g in PAYOFF_GROUPS]
    )


def stats_row(st: GenerationStats) -> list[str]:
    row = [str(st.generation)]
    row += [f"{st.kind_fraction(k):.6f}" for k in KIND_ORDER]
    row += [f"{st.master_fraction:.6f}", f"{st.slave_fraction:.6f}"]
    for g in PAYOFF_GROUPS:
        v = None if st.avg_payoff_per_move is None else st.avg_payoff_per_move[g]
        row.append("" if v is None or math.isnan(v) else f"{v:.6f}")
    return row


def write_outputs(result: RunResult, out: Path) -> str:
    """stats.csv, snapshots/gen_NNNNNN.txt and summary.txt; returns the summary line."""
    out.mkdir(parents=True, exist_ok=True)
    rows = [stats_row(s) for s in result.stats]
    final = compute_stats(result.final.cells, result.final.generation)
    rows.append(stats_row(final))
    with open(out / "stats.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(stats_header())
        w.writerows(rows)
    if result.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for gen, cells in sorted(result.snapshots.items()):
            (snap_dir / f"gen_{gen:06d}.txt").write_text(GridState(cells, gen).to_text())
    fix = "NONE" if result.fixation_generation is None else str(result.fixation_generation)
    kind = "" if result.fixation_kind is None else f" fixation_kind={result.fixation_kind.value}"
    fracs = " ".join(
        f"{k.value}={final.kind_fraction(k):.6f}" for k in KIND_ORDER if final.kind_fraction(k) > 0
    )
    summary = f"fixation_generation={fix}{kind} final_generation={result.final.generation} {fracs}"
    (out / "summary.txt").write_text(summary + "\n")
    return summary


# -- subcommands ------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    rng = RngPolicy(cfg.seed)
    grid = init_random(cfg.width, cfg.height, cfg.mix, rng)
    grid.freeze_roles = cfg.freeze_roles
    log.info("running %dx%d for %d generations", cfg.width, cfg.height, cfg.generations)
    result = run(
        grid, cfg.generations, cfg.rounds, cfg.payoffs, cfg.p_slave, rng,
        snapshot_every=cfg.snapshot_every, workers=cfg.workers,
    )
    print(write_outputs(result, cfg.output_dir))
    return EXIT_OK


def cmd_scenario(args: argparse.Namespace) -> int:
    try:
        text = Path(args.descriptor).read_text()
    except OSError as e:
        raise OSError(f"cannot read descriptor {args.descriptor}: {e.strerror}") from None
    try:
        scn = Scenario.parse(text)
    except ScenarioError as e:
        raise UsageError(f"{args.descriptor}: {e}") from None
    if args.generations is None:
        args.generations = 1
    args.width, args.height = scn.width, scn.height
    cfg = build_config(args)
    rng = RngPolicy(cfg.seed)
    grid = init_scenario(scn)
    if cfg.freeze_roles:
        grid.freeze_roles = True

    first: dict = {}

    def keep_first(res):
        if not first:
            first.update(totals=res.totals, played=res.played, after=res.grid.cells)

    result = run(
        grid, cfg.generations, cfg.rounds, cfg.payoffs, cfg.p_slave, rng,
        snapshot_every=cfg.snapshot_every, workers=cfg.workers, on_step=keep_first,
    )
    out = cfg.output_dir
    summary = write_outputs(result, out)
    if first:
        width = max(len(str(v)) for v in first["totals"].ravel().tolist())
        lines = [
            " ".join(f"{Phenotype(int(c)).char}:{str(v).rjust(width)}" for c, v in zip(crow, trow))
            for crow, trow in zip(first["played"], first["totals"].tolist())
        ]
        (out / "payoffs_gen0.txt").write_text("\n".join(lines) + "\n")
        kind_of = np.array([ph.kind is StrategyKind.CSMSM for ph in Phenotype])
        was_csmsm = kind_of[first["played"]]
        now_csmsm = kind_of[first["after"]]
        summary += (
            f" converted_to_csmsm_gen1={int((now_csmsm & ~was_csmsm).sum())}"
            f" lost_csmsm_gen1={int((was_csmsm & ~now_csmsm).sum())}"
        )
    print(summary)
    return EXIT_OK


def cmd_match(args: argparse.Namespace) -> int:
    try:
        a_kind, a_role = parse_player(args.player_a)
        b_kind, b_role = parse_player(args.player_b)
        p = validate_payoffs(PayoffValues.parse(args.payoffs))
    except (ValueError, PayoffError) as e:
        raise UsageError(str(e)) from None
    if args.rounds < 1:
        raise UsageError("rounds must be >= 1")

    def stream(side: int):
        return np.random.default_rng([args.seed, side])

    ma = make_machine(a_kind, a_role, stream(0) if a_kind is StrategyKind.RANDOM else None, payoffs=p)
    mb = make_machine(b_kind, b_role, stream(1) if b_kind is StrategyKind.RANDOM else None, payoffs=p)
    res = play_match(ma, mb, args.rounds, p)
    name_a = args.player_a.upper()
    name_b = args.player_b.upper()
    print(f"# {name_a} vs {name_b}, {args.rounds} rounds, payoffs T,R,P,S={args.payoffs}")
    print("round move_a move_b cum_a cum_b")
    cum_a = cum_b = 0
    for i, (x, y) in enumerate(zip(res.history_a, res.history_b), 1):
        pa, pb = stage_payoff(x, y, p)
        cum_a += pa
        cum_b += pb
        print(f"{i} {x.value} {y.value} {cum_a} {cum_b}")
    print(f"total {res.payoff_a} {res.payoff_b}")
    pa_ph, pb_ph = Phenotype.of(a_kind, a_role), Phenotype.of(b_kind, b_role)
    if pa_ph in analysis.COVERED and pb_ph in analysis.COVERED and args.rounds >= analysis.MIN_ROUNDS:
        ca = analysis.pair_payoff(pa_ph, pb_ph, args.rounds, p)
        cb = analysis.pair_payoff(pb_ph, pa_ph, args.rounds, p)
        print(f"closed_form {ca} {cb}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        p = validate_payoffs(PayoffValues.parse(args.payoffs))
        report = analysis.thresholds(args.rounds, p, l=args.l, m=args.m, q=args.q)
    except (ValueError, PayoffError) as e:
        raise UsageError(str(e)) from None
    except ZeroDivisionError as e:
        raise UsageError(str(e)) from None
    print(report.to_csv() if args.format == "csv" else report.to_text(), end="" if args.format == "csv" else "\n")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _sim_flags(sp: argparse.ArgumentParser, grid: bool = True) -> None:
    if grid:
        sp.add_argument("--width", type=int)
        sp.add_argument("--height", type=int)
        sp.add_argument("--mix", help="KIND:fraction,... e.g. CSMSM:0.2,TFT:0.8")
    sp.add_argument("--rounds", type=int, help="match length n")
    sp.add_argument("--generations", type=int)
    sp.add_argument("--payoffs", help="T,R,P,S")
    sp.add_argument("--p-slave", dest="p_slave", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--out", dest="output_dir", type=Path)
    sp.add_argument("--freeze-roles", dest="freeze_roles", action="store_const", const=True)
    sp.add_argument("--config", type=Path, help="key=value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csmsm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="random initial mix on a torus")
    _sim_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("scenario", help="run a hand-placed cluster descriptor")
    sp.add_argument("descriptor", type=Path)
    _sim_flags(sp, grid=False)
    sp.set_defaults(func=cmd_scenario)

    sp = sub.add_parser("match", help="print a single match transcript")
    sp.add_argument("player_a", help="KIND or CSMSM:MASTER|SLAVE")
    sp.add_argument("player_b")
    sp.add_argument("--rounds", type=int, default=50)
    sp.add_argument("--payoffs", default="5,3,1,0")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("analyze", help="closed-form invasion thresholds")
    sp.add_argument("--rounds", type=int, default=50)
    sp.add_argument("--payoffs", default="5,3,1,0")
    sp.add_argument("--l", type=int, help="slave neighbours of a border master (0-5)")
    sp.add_argument("--m", type=int, help="slave neighbours of a centre master (0-8)")
    sp.add_argument("--q", type=int, help="slave neighbours of a corner master (0-3)")
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
