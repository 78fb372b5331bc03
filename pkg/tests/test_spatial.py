import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracle import brute_lattice_totals
from csmsm import CANONICAL, PayoffValues, Phenotype, Role, StrategyKind
from csmsm.spatial import (
    GridState,
    RngPolicy,
    Scenario,
    ScenarioError,
    accumulate_payoffs,
    compute_stats,
    init_random,
    init_scenario,
    neighbors,
    run,
    step_generation,
)

FIG3_L4 = """
grid 9 9
background TFT
cluster 3 3 3 3
role 3 3 SLAVE
role 5 3 SLAVE
role 3 4 SLAVE
role 5 4 SLAVE
role 3 5 SLAVE
role 4 5 SLAVE
role 5 5 SLAVE
freeze_roles on
"""


def grid_from_rows(*rows: str, freeze: bool = False) -> GridState:
    g = GridState.from_text("\n".join(rows))
    g.freeze_roles = freeze
    return g


class TestNeighbors:
    def test_center_of_3x3(self):
        g = GridState(np.zeros((3, 3)))
        assert sorted(neighbors(g, 4)) == [0, 1, 2, 3, 5, 6, 7, 8]

    def test_corner_wraps(self):
        g = GridState(np.zeros((5, 5)))
        got = neighbors(g, 0)
        assert got == [24, 20, 21, 4, 1, 9, 5, 6]
        assert {i // 5 for i in got} == {4, 0, 1} and {i % 5 for i in got} == {4, 0, 1}

    @pytest.mark.parametrize("idx", range(9))
    def test_minimal_torus(self, idx):
        g = GridState(np.zeros((3, 3)))
        nb = neighbors(g, idx)
        assert len(set(nb)) == 8 and idx not in nb

    def test_bad_index(self):
        with pytest.raises(IndexError):
            neighbors(GridState(np.zeros((3, 3))), 9)

    def test_degenerate_grid_rejected(self):
        with pytest.raises(ValueError):
            GridState(np.zeros((2, 5)))


class TestInit:
    def test_half_half(self):
        g = init_random(200, 200, {"CSMSM": 0.5, "TFT": 0.5}, RngPolicy(1))
        c = g.counts()
        assert c[Phenotype.SLAVE] == 0
        assert abs(c[Phenotype.MASTER] / g.size - 0.5) < 0.01
        assert c[Phenotype.MASTER] + c[Phenotype.TFT] == g.size
        assert g.generation == 0

    def test_homogeneous(self):
        g = init_random(3, 3, {StrategyKind.TFT: 1.0}, RngPolicy(0))
        assert (g.cells == Phenotype.TFT).all()

    def test_twenty_eighty(self):
        g = init_random(100, 100, {"CSMSM": 0.2, "ALLD": 0.8}, RngPolicy(2))
        assert abs(g.counts()[Phenotype.MASTER] / g.size - 0.2) < 0.02

    @pytest.mark.parametrize("mix", [{"TFT": 0.5}, {"TFT": 1.2, "ALLD": -0.2}, {"NOPE": 1.0}])
    def test_bad_mix(self, mix):
        with pytest.raises(ValueError):
            init_random(5, 5, mix, RngPolicy(0))

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            init_random(2, 10, {"TFT": 1.0}, RngPolicy(0))

    def test_seeded(self):
        a = init_random(20, 20, {"CSMSM": 0.3, "TFT": 0.7}, RngPolicy(5))
        b = init_random(20, 20, {"CSMSM": 0.3, "TFT": 0.7}, RngPolicy(5))
        assert (a.cells == b.cells).all()


class TestScenario:
    def test_fig3_layout(self):
        g = init_scenario(Scenario.parse(FIG3_L4))
        assert g.freeze_roles
        assert g.to_text().splitlines()[3:6] == ["TTTmMmTTT", "TTTmMmTTT", "TTTmmmTTT"]

    def test_fig6_layout(self):
        g = init_scenario(Scenario.parse("grid 9 9\nbackground ALLD\ncluster 4 4 2 1\nrole 5 4 SLAVE\n"))
        assert g.cells[4, 4] == Phenotype.MASTER and g.cells[4, 5] == Phenotype.SLAVE
        assert (g.counts()[Phenotype.ALLD]) == 79

    def test_empty_cluster(self):
        g = init_scenario(Scenario.parse("grid 4 4\nbackground GRIM\ncluster 1 1 0 0\n"))
        assert (g.cells == Phenotype.GRIM).all()

    @pytest.mark.parametrize(
        "text, line",
        [
            ("grid 5 5\ncluster 4 4 2 2\n", None),
            ("grid 5 5\nbogus 1\n", 2),
            ("grid 5 5\ncluster 0 0 1 1\nrole 3 3 SLAVE\n", 3),
            ("grid 5 5\nrole 0 0 BOSS\n", 2),
            ("grid 5\n", 1),
            ("background TFT\n", None),
        ],
    )
    def test_errors(self, text, line):
        with pytest.raises(ScenarioError) as ei:
            Scenario.parse(text)
        assert ei.value.line == line

    def test_cluster_outside_grid(self):
        with pytest.raises(ScenarioError, match="outside"):
            init_scenario(Scenario(5, 5, StrategyKind.TFT, [(3, 3, 3, 3)]))


class TestPayoffs:
    @given(
        cells=hnp.arrays(np.uint8, st.tuples(st.integers(3, 5), st.integers(3, 5)),
                         elements=st.sampled_from([int(p) for p in Phenotype if p is not Phenotype.RANDOM])),
        n=st.integers(7, 30),
    )
    def test_totals_match_brute_force(self, cells, n):
        totals = accumulate_payoffs(cells, n, CANONICAL, RngPolicy(0), 0)
        rows = [[Phenotype(int(c)).name for c in row] for row in cells]
        assert totals.tolist() == brute_lattice_totals(rows, n)

    def test_fig3_border_master_total(self):
        res = step_generation(init_scenario(Scenario.parse(FIG3_L4)))
        assert res.totals[3, 4] == 1238
        assert res.totals[0, 0] == 1200
        assert res.grid.cell(4 * 9 + 4).kind is StrategyKind.CSMSM

    @given(
        cells=hnp.arrays(np.uint8, st.tuples(st.integers(3, 6), st.integers(3, 6)),
                         elements=st.sampled_from([int(p) for p in Phenotype])),
        seed=st.integers(0, 1000),
        gen=st.integers(0, 5),
    )
    def test_memoized_equals_unmemoized(self, cells, seed, gen):
        rng = RngPolicy(seed)
        fast = accumulate_payoffs(cells, 12, CANONICAL, rng, gen)
        slow = accumulate_payoffs(cells, 12, CANONICAL, rng, gen, memoize=False)
        assert (fast == slow).all()

    def test_workers_do_not_change_totals(self):
        g = init_random(30, 30, {"CSMSM": 0.3, "RANDOM": 0.4, "ADAPTIVE": 0.3}, RngPolicy(9))
        a = accumulate_payoffs(g.cells, 20, CANONICAL, RngPolicy(9), 3, workers=1)
        b = accumulate_payoffs(g.cells, 20, CANONICAL, RngPolicy(9), 3, workers=7)
        assert (a == b).all()

    def test_float_payoffs(self):
        p = PayoffValues(4.5, 3.25, 1, 0.5)
        g = init_random(8, 8, {"CSMSM": 0.5, "TFT": 0.5}, RngPolicy(0))
        tot = accumulate_payoffs(g.cells, 10, p, RngPolicy(0), 0)
        assert tot.dtype == np.float64


class TestStep:
    def test_homogeneous_absorbing(self):
        for kind in ("TFT", "ALLD", "GRIM", "ADAPTIVE", "TFTT", "ALLC"):
            g = init_random(6, 6, {kind: 1.0}, RngPolicy(0))
            res = run(g, 5)
            assert (res.final.cells == g.cells).all()
            assert res.final.generation == 5

    def test_zero_generations(self):
        g = init_random(5, 5, {"CSMSM": 0.5, "TFT": 0.5}, RngPolicy(0))
        res = run(g, 0)
        assert res.final is g and res.stats == []

    def test_role_flip_only_masters_to_slaves(self):
        g = init_random(40, 40, {"CSMSM": 1.0}, RngPolicy(0))
        res = step_generation(g, p_slave=0.7, rng=RngPolicy(3))
        share = (res.played == Phenotype.SLAVE).mean()
        assert 0.65 < share < 0.75
        g2 = GridState(np.full((4, 4), Phenotype.SLAVE))
        assert (step_generation(g2, p_slave=0.0).played == Phenotype.SLAVE).all()

    def test_frozen_roles(self):
        g = init_scenario(Scenario.parse(FIG3_L4))
        res = step_generation(g, p_slave=1.0)
        assert (res.played == g.cells).all()

    def test_p_slave_range(self):
        with pytest.raises(ValueError):
            step_generation(GridState(np.zeros((3, 3))), p_slave=1.5)

    @given(seed=st.integers(0, 10_000))
    def test_occupancy_conserved(self, seed):
        g = init_random(7, 6, {"CSMSM": 0.3, "TFT": 0.2, "RANDOM": 0.2, "ALLD": 0.3}, RngPolicy(seed))
        res = step_generation(g, 10, rng=RngPolicy(seed))
        h, w = g.cells.shape
        for y in range(h):
            for x in range(w):
                new = res.grid.cells[y, x]
                allowed = {res.played[(y + dy) % h, (x + dx) % w] for dy in (-1, 0, 1) for dx in (-1, 0, 1)}
                assert new in allowed
                if new != res.played[y, x]:
                    nb = [res.totals[(y + dy) % h, (x + dx) % w] for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
                    assert max(nb) > res.totals[y, x]

    def test_ties_broken_by_seed_not_direction(self):
        # a lone ALLC between two equal-scoring neighbours picks among them reproducibly
        g = init_random(9, 9, {"ALLC": 0.5, "ALLD": 0.5}, RngPolicy(4))
        a = step_generation(g, 10, rng=RngPolicy(4))
        b = step_generation(g, 10, rng=RngPolicy(4))
        assert (a.grid.cells == b.grid.cells).all()

    def test_stats_fractions(self):
        g = init_random(10, 10, {"CSMSM": 0.4, "TFT": 0.6}, RngPolicy(1))
        st_ = step_generation(g).stats
        fr = sum(st_.kind_fraction(k) for k in StrategyKind)
        assert fr == pytest.approx(1.0)
        assert st_.master_fraction + st_.slave_fraction == pytest.approx(st_.kind_fraction(StrategyKind.CSMSM))
        assert st_.generation == 0

    def test_stats_payoff_per_move(self):
        g = GridState(np.full((4, 4), Phenotype.TFT))
        st_ = step_generation(g, 50).stats
        assert st_.avg_payoff_per_move["TFT"] == 3.0
        assert np.isnan(st_.avg_payoff_per_move["CSMSM_MASTER"])

    def test_snapshots_align_with_stats(self):
        g = init_random(12, 12, {"CSMSM": 0.5, "TFT": 0.5}, RngPolicy(2))
        res = run(g, 6, rng=RngPolicy(2), snapshot_every=2)
        assert sorted(res.snapshots) == [0, 2, 4, 6]
        for gen in (0, 2, 4):
            s = compute_stats(res.snapshots[gen], gen)
            assert s.counts == res.stats[gen].counts

    def test_stop_on_fixation(self):
        g = init_random(20, 20, {"CSMSM": 0.5, "ALLC": 0.5}, RngPolicy(0))
        res = run(g, 100, rng=RngPolicy(0), stop_on_fixation=True, extra_after_fixation=3)
        assert res.fixation_kind is StrategyKind.CSMSM
        assert res.final.generation == res.fixation_generation + 3


def test_cell_view():
    g = init_scenario(Scenario.parse(FIG3_L4))
    c = g.cell(3 * 9 + 3)
    assert c.kind is StrategyKind.CSMSM and c.role is Role.SLAVE
    assert g.cell(0).role is None


def test_snapshot_text_roundtrip():
    g = init_random(7, 5, {"CSMSM": 0.2, "TFT": 0.2, "RANDOM": 0.2, "ADAPTIVE": 0.2, "TFTT": 0.2}, RngPolicy(0))
    assert (GridState.from_text(g.to_text()).cells == g.cells).all()
