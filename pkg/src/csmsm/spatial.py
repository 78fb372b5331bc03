"""Toroidal lattice population with best-neighbour imitation.

Cells hold :class:`~csmsm.strategies.Phenotype` codes in a ``(height, width)``
uint8 array. A generation is: role flips, one match per adjacent pair
(Moore-8, torus), then a synchronous imitation step.

Randomness is counter-style: every draw comes from a block keyed by
``(seed, purpose, generation)`` and each cell or edge owns a fixed slot in the
block, so results do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import enum
import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from csmsm.batch import payoff_dtype, play_batch
from csmsm.ipd_core import CANONICAL, PayoffValues, play_match, validate_payoffs
from csmsm.strategies import Phenotype, Role, StrategyKind, make_machine, moves_from_bits

# NW, N, NE, W, E, SW, S, SE as (row, col) offsets
NEIGHBOR_OFFSETS: tuple[tuple[int, int], ...] = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)
# one direction per unordered edge: E, S, SE, SW
EDGE_OFFSETS: tuple[tuple[int, int], ...] = ((0, 1), (1, 0), (1, 1), (1, -1))

KIND_ORDER: tuple[StrategyKind, ...] = tuple(StrategyKind)
N_PHENO = len(Phenotype)


class Purpose(enum.IntEnum):
    INIT = 0
    FLIP = 1
    UPDATE = 2
    MATCH = 3


@dataclass(frozen=True)
class RngPolicy:
    """Derives independent reproducible streams from one master seed."""

    master_seed: int = 0

    def generator(self, purpose: Purpose, generation: int) -> np.random.Generator:
        seed = int(self.master_seed) & 0xFFFF_FFFF_FFFF_FFFF
        return np.random.default_rng([seed, int(purpose), int(generation)])

    def uniforms(self, purpose: Purpose, generation: int, size) -> np.ndarray:
        return self.generator(purpose, generation).random(size)

    def match_bits(self, generation: int, n_cells: int, rounds: int) -> np.ndarray:
        """Defection bits indexed ``[edge_dir, cell, side, round]``."""
        g = self.generator(Purpose.MATCH, generation)
        return g.integers(0, 2, size=(len(EDGE_OFFSETS), n_cells, 2, rounds), dtype=np.uint8)


@dataclass(frozen=True)
class CellState:
    kind: StrategyKind
    role: Optional[Role]
    total_payoff: Optional[float] = None


@dataclass
class GridState:
    cells: np.ndarray
    generation: int = 0
    freeze_roles: bool = False

    def __post_init__(self) -> None:
        self.cells = np.asarray(self.cells, dtype=np.uint8)
        if self.cells.ndim != 2:
            raise ValueError("cells must be a 2-D array")
        h, w = self.cells.shape
        if w < 3 or h < 3:
            raise ValueError(f"grid must be at least 3x3 for 8 distinct neighbours, got {w}x{h}")
        if self.cells.max(initial=0) >= N_PHENO:
            raise ValueError("cells contain an unknown phenotype code")

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def size(self) -> int:
        return self.cells.size

    def cell(self, idx: int, totals: Optional[np.ndarray] = None) -> CellState:
        ph = Phenotype(int(self.cells.flat[idx]))
        tot = None if totals is None else totals.flat[idx].item()
        return CellState(ph.kind, ph.role, tot)

    def copy(self) -> "GridState":
        return GridState(self.cells.copy(), self.generation, self.freeze_roles)

    def counts(self) -> np.ndarray:
        return np.bincount(self.cells.ravel(), minlength=N_PHENO)

    def homogeneous_kind(self) -> Optional[StrategyKind]:
        c = self.counts()
        csmsm = c[Phenotype.MASTER] + c[Phenotype.SLAVE]
        if csmsm == self.size:
            return StrategyKind.CSMSM
        for ph in Phenotype:
            if ph.kind is not StrategyKind.CSMSM and c[ph] == self.size:
                return ph.kind
        return None

    def to_text(self) -> str:
        chars = np.array([ph.char for ph in Phenotype])
        return "\n".join("".join(row) for row in chars[self.cells]) + "\n"

    @classmethod
    def from_text(cls, text: str, generation: int = 0) -> "GridState":
        rows = [ln for ln in text.splitlines() if ln]
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValueError("snapshot rows must be non-empty and equal length")
        cells = np.array([[Phenotype.from_char(ch) for ch in r] for r in rows], dtype=np.uint8)
        return cls(cells, generation)


def shifted(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """``out[y, x] = arr[(y + dy) % H, (x + dx) % W]``."""
    return np.roll(arr, (-dy, -dx), axis=(0, 1))


def neighbors(g: GridState, idx: int) -> list[int]:
    """Flat indices of the 8 toroidal neighbours in NW,N,NE,W,E,SW,S,SE order."""
    if not 0 <= idx < g.size:
        raise IndexError(f"cell index {idx} outside grid of {g.size} cells")
    y, x = divmod(idx, g.width)
    return [((y + dy) % g.height) * g.width + (x + dx) % g.width for dy, dx in NEIGHBOR_OFFSETS]


def _normalise_mix(mix: Mapping) -> dict[StrategyKind, float]:
    out: dict[StrategyKind, float] = {}
    for k, f in mix.items():
        kind = StrategyKind.parse(k) if isinstance(k, str) else StrategyKind(k)
        f = float(f)
        if not np.isfinite(f) or f < 0:
            raise ValueError(f"fraction for {kind} must be a nonnegative number, got {f}")
        out[kind] = out.get(kind, 0.0) + f
    total = sum(out.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"mix fractions must sum to 1, got {total}")
    return out


def init_random(width: int, height: int, mix: Mapping, rng: RngPolicy) -> GridState:
    """Each cell's kind drawn independently from ``mix``; CSMSM cells start as masters."""
    if width < 3 or height < 3:
        raise ValueError(f"grid must be at least 3x3, got {width}x{height}")
    mix = _normalise_mix(mix)
    kinds = [k for k in KIND_ORDER if mix.get(k, 0.0) > 0]
    cum = np.cumsum([mix[k] for k in kinds])
    cum[-1] = 1.0
    u = rng.uniforms(Purpose.INIT, 0, (height, width))
    which = np.minimum(np.searchsorted(cum, u, side="right"), len(kinds) - 1)
    codes = np.array(
        [Phenotype.MASTER if k is StrategyKind.CSMSM else Phenotype[k.value] for k in kinds],
        dtype=np.uint8,
    )
    return GridState(codes[which])


@functools.lru_cache(maxsize=64)
def pair_table(rounds: int, p: PayoffValues) -> np.ndarray:
    """``table[a, b]`` = total of phenotype ``a`` against ``b``.

    RANDOM rows and columns are left at zero; those matches are simulated
    individually.
    """
    table = np.zeros((N_PHENO, N_PHENO), dtype=payoff_dtype(p))
    det = [ph for ph in Phenotype if ph is not Phenotype.RANDOM]
    for a in det:
        for b in det:
            if b < a:
                continue
            res = play_match(
                make_machine(a.kind, a.role, payoffs=p),
                make_machine(b.kind, b.role, payoffs=p),
                rounds,
                p,
            )
            table[a, b] = res.payoff_a
            table[b, a] = res.payoff_b
    table.flags.writeable = False
    return table


@dataclass
class GenerationStats:
    generation: int
    counts: dict[Phenotype, int]
    n_cells: int
    # group name -> mean payoff per move; None when no payoffs were played
    avg_payoff_per_move: Optional[dict[str, float]] = None

    def kind_fraction(self, kind: StrategyKind) -> float:
        if kind is StrategyKind.CSMSM:
            return (self.counts[Phenotype.MASTER] + self.counts[Phenotype.SLAVE]) / self.n_cells
        return self.counts[Phenotype[kind.value]] / self.n_cells

    @property
    def master_fraction(self) -> float:
        return self.counts[Phenotype.MASTER] / self.n_cells

    @property
    def slave_fraction(self) -> float:
        return self.counts[Phenotype.SLAVE] / self.n_cells

    @property
    def slave_share(self) -> float:
        """Slaves as a fraction of CSMSM cells (NaN with no CSMSM)."""
        n = self.counts[Phenotype.MASTER] + self.counts[Phenotype.SLAVE]
        return self.counts[Phenotype.SLAVE] / n if n else float("nan")


PAYOFF_GROUPS: tuple[str, ...] = tuple(
    k.value for k in KIND_ORDER if k is not StrategyKind.CSMSM
) + ("CSMSM_MASTER", "CSMSM_SLAVE", "CSMSM")


def _group_members(group: str) -> tuple[Phenotype, ...]:
    if group == "CSMSM":
        return (Phenotype.MASTER, Phenotype.SLAVE)
    if group == "CSMSM_MASTER":
        return (Phenotype.MASTER,)
    if group == "CSMSM_SLAVE":
        return (Phenotype.SLAVE,)
    return (Phenotype[group],)


def compute_stats(
    cells: np.ndarray, generation: int, totals: Optional[np.ndarray] = None, rounds: int = 1
) -> GenerationStats:
    counts_arr = np.bincount(cells.ravel(), minlength=N_PHENO)
    counts = {ph: int(counts_arr[ph]) for ph in Phenotype}
    avg = None
    if totals is not None:
        sums = np.bincount(cells.ravel(), weights=totals.ravel().astype(np.float64), minlength=N_PHENO)
        avg = {}
        for group in PAYOFF_GROUPS:
            members = _group_members(group)
            n = sum(counts[m] for m in members)
            s = sum(sums[m] for m in members)
            avg[group] = s / (n * 8 * rounds) if n else float("nan")
    return GenerationStats(generation, counts, cells.size, avg)


def _split(n: int, parts: int) -> list[slice]:
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _scalar_edges(
    codes_a: np.ndarray, codes_b: np.ndarray, bits_a, bits_b, rounds: int, p: PayoffValues
) -> tuple[np.ndarray, np.ndarray]:
    """Reference path: one scalar match per edge, no memoisation."""
    dtype = payoff_dtype(p)
    out_a = np.zeros(len(codes_a), dtype)
    out_b = np.zeros(len(codes_a), dtype)
    for i, (ca, cb) in enumerate(zip(codes_a, codes_b)):
        pa, pb = Phenotype(int(ca)), Phenotype(int(cb))
        sa = moves_from_bits(bits_a[i]) if pa is Phenotype.RANDOM else None
        sb = moves_from_bits(bits_b[i]) if pb is Phenotype.RANDOM else None
        res = play_match(
            make_machine(pa.kind, pa.role, sa, payoffs=p),
            make_machine(pb.kind, pb.role, sb, payoffs=p),
            rounds,
            p,
        )
        out_a[i] = res.payoff_a
        out_b[i] = res.payoff_b
    return out_a, out_b


def accumulate_payoffs(
    cells: np.ndarray,
    rounds: int,
    p: PayoffValues,
    rng: RngPolicy,
    generation: int,
    *,
    workers: int = 1,
    memoize: bool = True,
) -> np.ndarray:
    """Per-cell totals over the 8 matches each cell plays this generation."""
    h, w = cells.shape
    dtype = payoff_dtype(p)
    table = pair_table(rounds, p)
    bits = rng.match_bits(generation, cells.size, rounds) if (cells == Phenotype.RANDOM).any() else None

    # per direction: payoff earned by the cell and by its neighbour across the edge
    own_pay: list[np.ndarray] = []
    nb_pay: list[np.ndarray] = []
    for d, (dy, dx) in enumerate(EDGE_OFFSETS):
        nb = shifted(cells, dy, dx)
        a_flat, b_flat = cells.ravel(), nb.ravel()
        if memoize:
            pa = table[a_flat, b_flat].astype(dtype, copy=True)
            pb = table[b_flat, a_flat].astype(dtype, copy=True)
            sim = np.flatnonzero((a_flat == Phenotype.RANDOM) | (b_flat == Phenotype.RANDOM))
        else:
            pa = np.zeros(cells.size, dtype)
            pb = np.zeros(cells.size, dtype)
            sim = np.arange(cells.size)
        if sim.size:
            ba = bits[d, sim, 0] if bits is not None else None
            bb = bits[d, sim, 1] if bits is not None else None
            kernel = (
                (lambda s: play_batch(a_flat[sim[s]], b_flat[sim[s]], rounds, p,
                                      None if ba is None else ba[s], None if bb is None else bb[s]))
                if memoize
                else (lambda s: _scalar_edges(a_flat[sim[s]], b_flat[sim[s]],
                                              None if ba is None else ba[s],
                                              None if bb is None else bb[s], rounds, p))
            )
            chunks = _split(sim.size, max(1, workers))
            if workers > 1 and len(chunks) > 1:
                with ThreadPoolExecutor(max_workers=workers) as ex:
                    results = list(ex.map(kernel, chunks))
            else:
                results = [kernel(s) for s in chunks]
            for s, (ra, rb) in zip(chunks, results):
                pa[sim[s]] = ra
                pb[sim[s]] = rb
        own_pay.append(pa.reshape(h, w))
        nb_pay.append(pb.reshape(h, w))

    totals = np.zeros((h, w), dtype)
    for (dy, dx), pa, pb in zip(EDGE_OFFSETS, own_pay, nb_pay):
        totals += pa
        # pb[y, x] belongs to the cell at (y+dy, x+dx)
        totals += np.roll(pb, (dy, dx), axis=(0, 1))
    return totals


def flip_roles(cells: np.ndarray, p_slave: float, rng: RngPolicy, generation: int) -> np.ndarray:
    u = rng.uniforms(Purpose.FLIP, generation, cells.shape)
    out = cells.copy()
    out[(cells == Phenotype.MASTER) & (u < p_slave)] = Phenotype.SLAVE
    return out


def imitate(cells: np.ndarray, totals: np.ndarray, rng: RngPolicy, generation: int) -> np.ndarray:
    """Synchronous best-neighbour imitation.

    A cell keeps its phenotype unless some neighbour scored strictly more; it
    then copies a maximal neighbour, ties among those broken uniformly from
    the cell's own draw.
    """
    nb_tot = np.stack([shifted(totals, dy, dx) for dy, dx in NEIGHBOR_OFFSETS])
    nb_codes = np.stack([shifted(cells, dy, dx) for dy, dx in NEIGHBOR_OFFSETS])
    best = nb_tot.max(axis=0)
    improve = best > totals
    cand = nb_tot == best
    n_cand = cand.sum(axis=0)
    u = rng.uniforms(Purpose.UPDATE, generation, cells.shape)
    pick = np.minimum((u * n_cand).astype(np.int64), n_cand - 1)
    # index of the (pick+1)-th candidate in scan order
    choice = np.argmax(np.cumsum(cand, axis=0) > pick[None], axis=0)
    winner = np.take_along_axis(nb_codes, choice[None], axis=0)[0]
    return np.where(improve, winner, cells).astype(np.uint8)


@dataclass
class StepResult:
    grid: GridState
    stats: GenerationStats
    played: np.ndarray  # occupancy after role flips, i.e. who played this generation
    totals: np.ndarray


def step_generation(
    g: GridState,
    rounds: int = 50,
    p: PayoffValues = CANONICAL,
    p_slave: float = 0.7,
    rng: RngPolicy = RngPolicy(),
    *,
    workers: int = 1,
    memoize: bool = True,
) -> StepResult:
    validate_payoffs(p)
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if not 0.0 <= p_slave <= 1.0:
        raise ValueError(f"p_slave must be in [0, 1], got {p_slave}")
    gen = g.generation
    played = g.cells if g.freeze_roles else flip_roles(g.cells, p_slave, rng, gen)
    totals = accumulate_payoffs(played, rounds, p, rng, gen, workers=workers, memoize=memoize)
    new_cells = imitate(played, totals, rng, gen)
    stats = compute_stats(played, gen, totals, rounds)
    return StepResult(GridState(new_cells, gen + 1, g.freeze_roles), stats, played, totals)


@dataclass
class RunResult:
    final: GridState
    stats: list[GenerationStats] = field(default_factory=list)
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    fixation_generation: Optional[int] = None
    fixation_kind: Optional[StrategyKind] = None


def run(
    g: GridState,
    generations: int,
    rounds: int = 50,
    p: PayoffValues = CANONICAL,
    p_slave: float = 0.7,
    rng: RngPolicy = RngPolicy(),
    *,
    snapshot_every: int = 0,
    stop_on_fixation: bool = False,
    extra_after_fixation: int = 0,
    workers: int = 1,
    memoize: bool = True,
    on_step: Optional[Callable[[StepResult], None]] = None,
) -> RunResult:
    """Iterate :func:`step_generation`.

    Snapshot ``k`` is the occupancy that played generation ``k`` (after role
    flips), so it lines up with ``stats[k]``; the final grid is snapshotted too
    when its generation falls on the interval. With ``stop_on_fixation`` the
    run ends ``extra_after_fixation`` generations after one kind fills the grid.
    """
    if generations < 0:
        raise ValueError("generations must be >= 0")
    out = RunResult(g)
    kind = g.homogeneous_kind()
    if kind is not None:
        out.fixation_generation, out.fixation_kind = g.generation, kind
    cur = g
    stop_at = None
    for _ in range(generations):
        if stop_on_fixation and out.fixation_generation is not None and stop_at is None:
            stop_at = cur.generation + extra_after_fixation
        if stop_at is not None and cur.generation >= stop_at:
            break
        res = step_generation(cur, rounds, p, p_slave, rng, workers=workers, memoize=memoize)
        if snapshot_every and res.stats.generation % snapshot_every == 0:
            out.snapshots[res.stats.generation] = res.played
        out.stats.append(res.stats)
        if on_step is not None:
            on_step(res)
        cur = res.grid
        if out.fixation_generation is None:
            kind = cur.homogeneous_kind()
            if kind is not None:
                out.fixation_generation, out.fixation_kind = cur.generation, kind
    if snapshot_every and cur.generation % snapshot_every == 0:
        out.snapshots[cur.generation] = cur.cells
    out.final = cur
    return out


# -- scenario descriptors ---------------------------------------------------


class ScenarioError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass
class Scenario:
    """A CSMSM block (or several) with explicit roles in a uniform background."""

    width: int
    height: int
    background: StrategyKind = StrategyKind.TFT
    clusters: list[tuple[int, int, int, int]] = field(default_factory=list)
    roles: dict[tuple[int, int], Role] = field(default_factory=dict)
    freeze_roles: bool = False

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        """Parse ``grid W H`` / ``background KIND`` / ``cluster X Y W H`` /
        ``role X Y MASTER|SLAVE`` / ``freeze_roles on|off`` lines.

        X is the column and Y the row; ``#`` starts a comment.
        """
        grid = None
        background = StrategyKind.TFT
        clusters: list[tuple[int, int, int, int]] = []
        roles: dict[tuple[int, int], Role] = {}
        role_lines: dict[tuple[int, int], int] = {}
        freeze = False
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            word, *args = line.split()
            word = word.lower()
            try:
                if word == "grid":
                    w, h = _ints(args, 2)
                    if w < 3 or h < 3:
                        raise ValueError(f"grid must be at least 3x3, got {w}x{h}")
                    grid = (w, h)
                elif word == "background":
                    _arity(args, 1)
                    background = StrategyKind.parse(args[0])
                    if background is StrategyKind.CSMSM:
                        raise ValueError("background cannot be CSMSM")
                elif word == "cluster":
                    x, y, w, h = _ints(args, 4)
                    if w < 0 or h < 0:
                        raise ValueError("cluster size must be nonnegative")
                    clusters.append((x, y, w, h))
                elif word == "role":
                    _arity(args, 3)
                    x, y = _ints(args[:2], 2)
                    roles[(x, y)] = Role.parse(args[2])
                    role_lines[(x, y)] = lineno
                elif word == "freeze_roles":
                    _arity(args, 1)
                    if args[0].lower() not in ("on", "off"):
                        raise ValueError("freeze_roles takes on|off")
                    freeze = args[0].lower() == "on"
                else:
                    raise ValueError(f"unknown directive {word!r}")
            except ValueError as e:
                raise ScenarioError(str(e), lineno) from None
        if grid is None:
            raise ScenarioError("missing 'grid W H' directive")
        scn = cls(grid[0], grid[1], background, clusters, roles, freeze)
        inside = scn.cluster_cells()
        for cell, lineno in role_lines.items():
            if cell not in inside:
                raise ScenarioError(f"role cell ({cell[0]}, {cell[1]}) is not inside a cluster", lineno)
        scn.validate()
        return scn

    def cluster_cells(self) -> set[tuple[int, int]]:
        return {(x + i, y + j) for x, y, w, h in self.clusters for i in range(w) for j in range(h)}

    def validate(self) -> None:
        for x, y, w, h in self.clusters:
            if x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                raise ScenarioError(f"cluster {x} {y} {w} {h} lies outside the {self.width}x{self.height} grid")
        inside = self.cluster_cells()
        for x, y in self.roles:
            if (x, y) not in inside:
                raise ScenarioError(f"role cell ({x}, {y}) is not inside a cluster")


def _arity(args: list[str], n: int) -> None:
    if len(args) != n:
        raise ValueError(f"expected {n} argument(s), got {len(args)}")


def _ints(args: list[str], n: int) -> list[int]:
    _arity(args, n)
    try:
        return [int(a) for a in args]
    except ValueError:
        raise ValueError(f"expected integers, got {' '.join(args)!r}") from None


def init_scenario(scn: Scenario) -> GridState:
    """Grid for a scenario; cluster cells without an explicit role are masters."""
    scn.validate()
    cells = np.full((scn.height, scn.width), Phenotype[scn.background.value], dtype=np.uint8)
    for x, y in scn.cluster_cells():
        role = scn.roles.get((x, y), Role.MASTER)
        cells[y, x] = Phenotype[role.value]
    return GridState(cells, 0, scn.freeze_roles)


def fractions_from_cells(cells: np.ndarray) -> dict[str, float]:
    st = compute_stats(cells, 0)
    out = {k.value: st.kind_fraction(k) for k in KIND_ORDER}
    out["csmsm_master"] = st.master_fraction
    out["csmsm_slave"] = st.slave_fraction
    return out

