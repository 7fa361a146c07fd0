import math

import numpy as np
import pytest
from scipy.stats import chi2 as chi2_dist

from fentropy.divergence import CHI2, KL, ConvexGenerator, FiniteMeasure, f_divergence
from fentropy.errors import BudgetExceeded, IncompleteTable, ParseError
from fentropy.free_boundary import harmonic_measure, uniform_generator_measure
from fentropy.sigma_walk import (
    GroupSpec,
    LevelFunction,
    StochasticSequence,
    abel_identity_residual,
    abel_measure,
    boundary_empirical,
    check_harmonic,
    constant_sequence,
    exact_distribution,
    folner_entropy_curve,
    martingale_check,
    poisson_transform_cylinder,
    sample_endpoints,
    sample_trajectory,
    validate_sigma,
)

MU2 = uniform_generator_measure(2)
Z = GroupSpec("int")


def coin_sequence():
    return StochasticSequence(Z, [1], [[[{1: 0.5, -1: 0.5}]]])


def two_sheet_sequence(seed=0):
    """A random 2-sheet sequence on Z with a 1x2 first matrix, then 2x2."""
    rng = np.random.default_rng(seed)

    def cellgen(k):
        supp = [-1, 0, 1]
        w = rng.dirichlet(np.ones(len(supp)))
        return {s: float(x) for s, x in zip(supp, w)}

    m0_weights = rng.dirichlet(np.ones(2))
    m0 = [[{k: v * m0_weights[j] for k, v in cellgen(j).items()}
           for j in range(2)]]
    m1 = []
    for i in range(2):
        w = rng.dirichlet(np.ones(2))
        m1.append([{k: v * w[j] for k, v in cellgen(j).items()}
                   for j in range(2)])
    return StochasticSequence(Z, [2, 2], [m0, m1], beyond="hold-last")


class TestValidation:
    def test_constant_sequence_passes_with_support_warning(self):
        rep = validate_sigma(constant_sequence(MU2))
        assert rep["passes"] is True
        assert rep["sigma0_full_support"] is False
        assert rep["warnings"]

    def test_zero_column_reported(self):
        s = StochasticSequence(Z, [2], [[[{0: 1.0}, {}]]])
        rep = validate_sigma(s)
        assert rep["passes"] is False
        assert rep["zero_columns"]

    def test_row_residual_reported(self):
        s = StochasticSequence(Z, [1], [[[{0: 0.9}]]])
        rep = validate_sigma(s)
        assert rep["passes"] is False
        assert rep["max_row_residual"] == pytest.approx(0.1)

    def test_two_sheet_passes(self):
        assert validate_sigma(two_sheet_sequence())["passes"] is True

    def test_json_round_trip(self):
        s = two_sheet_sequence()
        back = StochasticSequence.from_json(s.to_json())
        assert back.ell == s.ell and back.beyond == s.beyond
        assert back.matrices == s.matrices


class TestExactDistribution:
    def test_level_zero_is_sigma0(self):
        s = constant_sequence(MU2)
        dist = exact_distribution(s, 0)
        for j in (-2, -1, 1, 2):
            assert dist.entries[(0, (j,))] == pytest.approx(0.25)

    def test_level_one_uniform_f2(self):
        dist = exact_distribution(constant_sequence(MU2), 1)
        assert dist.entries[(0, ())] == pytest.approx(0.25)
        assert dist.entries[(0, (1, 2))] == pytest.approx(1.0 / 16.0)
        assert dist.total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", [0, 5, 12, 19])
    def test_binomial_oracle_on_z(self, n):
        dist = exact_distribution(coin_sequence(), n)
        steps = n + 1
        for (j, g), m in dist.entries.items():
            k = (steps + g) // 2
            assert (steps + g) % 2 == 0
            assert m == pytest.approx(math.comb(steps, k) / 2.0**steps, abs=1e-14)

    def test_chapman_kolmogorov(self):
        s = two_sheet_sequence()
        for n in range(6):
            prev = exact_distribution(s, n)
            nxt = exact_distribution(s, n + 1)
            mat = s.matrix(n + 1)
            manual = {}
            for (i, g), m in prev.entries.items():
                for j, cell in enumerate(mat[i]):
                    for x, w in cell.items():
                        key = (j, g + x)
                        manual[key] = manual.get(key, 0.0) + m * w
            for key in set(manual) | set(nxt.entries):
                assert nxt.entries.get(key, 0.0) == pytest.approx(
                    manual.get(key, 0.0), abs=1e-14
                )

    def test_boundary_family_stationarity(self):
        # for the constant-mu walk the harmonic cylinder family satisfies
        # mu * nu^(n) = nu^(n-1)
        from fentropy.free_boundary import convolve

        nu = harmonic_measure(MU2, 4)
        conv = convolve(MU2, nu, 3)
        marg = nu.marginal(3)
        worst = max(abs(conv.mass(w) - marg.mass(w)) for w in marg.masses)
        assert worst < 1e-12

    def test_budget_exceeded(self):
        with pytest.raises(BudgetExceeded):
            exact_distribution(constant_sequence(MU2), 40, budget=10_000)


class TestSampling:
    def test_point_mass_trajectory_constant(self):
        s = StochasticSequence(Z, [1], [[[{0: 1.0}]]])
        traj = sample_trajectory(s, 6, 1)
        assert all(st.g == 0 and st.i == 0 for st in traj)

    def test_seed_determinism(self):
        s = constant_sequence(MU2)
        t1 = sample_trajectory(s, 10, 99)
        t2 = sample_trajectory(s, 10, 99)
        assert [(st.n, st.i, st.g) for st in t1] == [(st.n, st.i, st.g) for st in t2]

    def test_monte_carlo_matches_exact_level2(self):
        s = coin_sequence()
        exact = exact_distribution(s, 2)
        n_traj = 20_000
        counts = sample_endpoints(s, 2, n_traj, 1000)
        for (j, g), m in exact.entries.items():
            freq = counts.get((j, g), 0) / n_traj
            se = math.sqrt(m * (1 - m) / n_traj)
            assert abs(freq - m) < 4 * se + 1e-9


class TestHarmonicity:
    def test_constant_function_harmonic(self):
        s = constant_sequence(MU2)
        h = LevelFunction([], default=3.5)
        assert check_harmonic(s, h, range(1, 4)) == 0.0

    def test_poisson_transform_harmonic(self):
        s = constant_sequence(MU2)
        h = poisson_transform_cylinder(MU2, (1,), levels=4)
        assert check_harmonic(s, h, range(1, 5)) < 1e-12

    def test_poisson_transform_depth2(self):
        s = constant_sequence(MU2)
        h = poisson_transform_cylinder(MU2, (1, 2), levels=3)
        assert check_harmonic(s, h, range(1, 4)) < 1e-12

    def test_perturbation_detected(self):
        s = constant_sequence(MU2)
        h = poisson_transform_cylinder(MU2, (1,), levels=3)
        tables = [dict(t) for t in h.tables]
        key = next(iter(tables[1]))
        tables[1][key] += 0.1
        bad = LevelFunction(tables, default=h.default)
        assert check_harmonic(s, bad, range(1, 3)) >= 0.1 * 0.25 - 1e-12

    def test_incomplete_table(self):
        h = LevelFunction([{(0, ()): 1.0}], default=None)
        with pytest.raises(IncompleteTable):
            h.value(2, 0, ())

    def test_martingale_of_harmonic_function(self):
        s = constant_sequence(MU2)
        h = poisson_transform_cylinder(MU2, (1,), levels=4)
        assert martingale_check(s, h, 2) < 1e-12

    def test_martingale_step_function(self):
        s = StochasticSequence(Z, [1], [[[{0: 1.0}]]])
        h = LevelFunction([{(0, 0): 0.0}, {(0, 0): 1.0}], default=None)
        assert martingale_check(s, h, 0) == pytest.approx(1.0)

    def test_martingale_equals_harmonicity_residual(self):
        s = constant_sequence(MU2)
        rng = np.random.default_rng(3)
        # random tables over the support reachable at levels 2 and 3
        d2 = exact_distribution(s, 2)
        d3 = exact_distribution(s, 3)
        tables = [dict(), dict(), {k: float(rng.random()) for k in d2.entries},
                  {k: float(rng.random()) for k in d3.entries}]
        h = LevelFunction(tables, default=0.0)
        m = martingale_check(s, h, 2)
        r = check_harmonic(s, h, range(3, 4))
        assert m == pytest.approx(r, abs=1e-14)


class TestBoundaryEmpirical:
    def test_depth1_frequencies(self):
        rep = boundary_empirical(MU2, steps=40, trajectories=20_000, seed=5, depth=1)
        for key, row in rep["table"].items():
            assert abs(row["freq"] - row["expected"]) < 4 * row["stderr"] + 1e-9
        assert rep["discards"] <= 0.01 * 20_000

    def test_depth2_frequencies(self):
        rep = boundary_empirical(MU2, steps=40, trajectories=20_000, seed=6, depth=2)
        some = next(iter(rep["table"].values()))
        assert some["expected"] == pytest.approx(1.0 / 12.0, abs=1e-12)
        for row in rep["table"].values():
            assert abs(row["freq"] - row["expected"]) < 4 * row["stderr"] + 1e-9

    def test_zero_trajectories(self):
        rep = boundary_empirical(MU2, steps=20, trajectories=0, seed=1, depth=1)
        assert rep["table"] == {}

    def test_determinism(self):
        r1 = boundary_empirical(MU2, steps=20, trajectories=500, seed=9, depth=1)
        r2 = boundary_empirical(MU2, steps=20, trajectories=500, seed=9, depth=1)
        assert r1 == r2

    def test_needs_enough_steps(self):
        with pytest.raises(ParseError):
            boundary_empirical(MU2, steps=3, trajectories=10, seed=0, depth=1)


class TestAbel:
    def test_level_totals_geometric(self):
        ab = abel_measure(coin_sequence(), -1, 0, 0.5, 0, 1e-8)
        level = {}
        for (n, j, g), m in ab.entries.items():
            level[n] = level.get(n, 0.0) + m
        for n, m in level.items():
            assert m == pytest.approx(0.5 * 0.5**n, abs=1e-14)

    def test_tail_mass_exact(self):
        ab = abel_measure(coin_sequence(), -1, 0, 0.5, 0, 1e-8)
        assert ab.tail_mass == pytest.approx(0.5 ** (ab.N + 1), abs=1e-16)
        assert ab.stored_total + ab.tail_mass == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("t,a", [(0, 0.5), (1, 0.3), (2, 0.7)])
    def test_identity_on_z(self, t, a):
        for s in (coin_sequence(), two_sheet_sequence(1), two_sheet_sequence(2)):
            assert abel_identity_residual(s, t, a, 0, 1e-10) < 1e-12

    def test_identity_on_free_group(self):
        s = constant_sequence(MU2)
        assert abel_identity_residual(s, 1, 0.5, 0, 1e-3) < 1e-12

    def test_abel_domination(self):
        s = coin_sequence()
        a = 0.5
        ab0 = abel_measure(s, 0, 0, a, 0, 1e-8)
        ab1 = abel_measure(s, 0, 0, a, 1, 1e-8, N=ab0.N)
        for key, m in ab1.entries.items():
            assert m <= ab0.entries.get(key, 0.0) / a + 1e-14


class TestFolner:
    def test_entropy_decreases_in_a(self):
        lam = FiniteMeasure({-1: 0.5, 1: 0.5})
        curve = folner_entropy_curve(lam, KL, [0.5, 0.9, 0.99], 1e-6,
                                     max_level=12)["curve"]
        hs = [row["h"] for row in curve]
        assert hs[0] > hs[1] > hs[2] > 0

    def test_small_a_limit_is_sigma0_entropy(self):
        # as a -> 0 the level-0 geometric dominates, so h approaches the
        # shift divergence of the geometric itself
        lam = FiniteMeasure({1: 1.0})
        h_small = folner_entropy_curve(lam, KL, [1e-6], 1e-4,
                                       max_level=6)["curve"][0]["h"]
        # KL(shift of geometric || geometric) for c b^|k| with b = 0.5:
        # direct large-window computation
        b, c = 0.5, (1 - 0.5) / (1 + 0.5)
        ks = np.arange(-80, 81)
        q = c * b ** np.abs(ks)
        p = c * b ** np.abs(ks - 1)
        direct = float(np.sum(p * np.log(p / q)))
        assert h_small == pytest.approx(direct, abs=1e-3)

    def test_shifted_uniform_boundary_effect(self):
        # divergence of a shifted uniform on [-M, M] against itself is a pure
        # boundary effect: f(0+)/(2M+1) for generators with finite slope data
        f = ConvexGenerator("power", 0.5)
        M = 40
        atoms = {k: 1.0 / (2 * M + 1) for k in range(-M, M + 1)}
        shifted = {k + 1: v for k, v in atoms.items()}
        labels = set(atoms) | set(shifted)
        P = FiniteMeasure({k: shifted.get(k, 0.0) for k in labels})
        Q = FiniteMeasure({k: atoms.get(k, 0.0) for k in labels})
        val = f_divergence(P, Q, f)
        assert val == pytest.approx(f.at_zero / (2 * M + 1), abs=1e-12)

    def test_budget_guard(self):
        lam = FiniteMeasure({1: 1.0})
        with pytest.raises(BudgetExceeded):
            folner_entropy_curve(lam, KL, [0.999], 1e-10)

    def test_tail_mass_reported(self):
        lam = FiniteMeasure({-1: 0.5, 1: 0.5})
        row = folner_entropy_curve(lam, KL, [0.9], 1e-6, max_level=8)["curve"][0]
        assert row["truncation_level"] == 8
        assert row["tail_mass"] == pytest.approx(0.9**9)


class TestMonteCarloChiSquared:
    def test_level3_chi_squared(self):
        s = coin_sequence()
        exact = exact_distribution(s, 3)
        n_traj = 20_000
        counts = sample_endpoints(s, 3, n_traj, 50_000)
        stat = 0.0
        for (j, g), m in exact.entries.items():
            obs = counts.get((j, g), 0)
            exp = m * n_traj
            stat += (obs - exp) ** 2 / exp
        dof = len(exact.entries) - 1
        assert stat < chi2_dist.ppf(0.999, dof)
