"""Tests for QUBO containers, penalties, and solvers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epifmqa.errors import ContractError
from epifmqa.qubo import (
    AnnealParams,
    BinarySolution,
    QuboProblem,
    add_cardinality_penalty,
    brute_force,
    energy,
    normalize,
    solve_sa,
)


def random_problem(n, seed):
    rng = np.random.default_rng(seed)
    return QuboProblem(np.triu(rng.normal(size=(n, n))))


class TestQuboProblem:
    def test_n(self):
        q = QuboProblem(np.zeros((3, 3)))
        assert q.n == 3

    def test_rejects_non_square(self):
        with pytest.raises(ContractError):
            QuboProblem(np.zeros((2, 3)))

    def test_rejects_lower_triangle_entries(self):
        m = np.array([[1.0, 0.0], [2.0, 1.0]])
        with pytest.raises(ContractError):
            QuboProblem(m)

    def test_rejects_non_finite(self):
        with pytest.raises(ContractError):
            QuboProblem(np.array([[np.nan]]))

    def test_matrix_is_read_only(self):
        q = QuboProblem(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            q.matrix[0, 0] = 1.0

    def test_does_not_alias_caller_array(self):
        m = np.zeros((2, 2))
        q = QuboProblem(m)
        m[0, 0] = 5.0
        assert q.matrix[0, 0] == 0.0

    def test_from_terms(self):
        q = QuboProblem.from_terms(3, {(0, 0): 1.0, (0, 2): -2.0}, offset=0.5)
        assert q.matrix[0, 0] == 1.0
        assert q.matrix[0, 2] == -2.0
        assert q.offset == 0.5

    def test_from_terms_rejects_swapped_indices(self):
        with pytest.raises(ContractError):
            QuboProblem.from_terms(3, {(2, 0): 1.0})


class TestEnergy:
    @pytest.mark.parametrize(
        "bits, expected",
        [
            # E = x1 + x2 - 2 x1 x2
            ((0, 0), 0.0),
            ((1, 0), 1.0),
            ((0, 1), 1.0),
            ((1, 1), 0.0),
        ],
    )
    def test_two_variable_example(self, bits, expected):
        q = QuboProblem.from_terms(2, {(0, 0): 1.0, (0, 1): -2.0, (1, 1): 1.0})
        assert energy(q, bits) == pytest.approx(expected)

    def test_offset_excluded(self):
        q = QuboProblem(np.array([[2.0]]), offset=7.0)
        assert energy(q, [1]) == pytest.approx(2.0)

    def test_rejects_wrong_length(self):
        q = QuboProblem(np.zeros((3, 3)))
        with pytest.raises(ContractError):
            energy(q, [0, 1])

    def test_rejects_non_binary(self):
        q = QuboProblem(np.zeros((2, 2)))
        with pytest.raises(ContractError):
            energy(q, [0, 2])


class TestCardinalityPenalty:
    def test_coefficient_shifts(self):
        # lam*(sum x - d)^2 with d=3, lam=2: diagonal gets 2*(1-6) = -10,
        # each off-diagonal gets 2*2 = 4, dropped constant is 2*9 = 18.
        q = QuboProblem(np.zeros((4, 4)))
        p = add_cardinality_penalty(q, d=3, lam=2.0)
        assert np.diag(p.matrix) == pytest.approx(np.full(4, -10.0))
        assert p.matrix[np.triu_indices(4, k=1)] == pytest.approx(np.full(6, 4.0))
        assert p.offset == pytest.approx(18.0)

    def test_offset_accumulates(self):
        q = QuboProblem(np.zeros((2, 2)), offset=1.0)
        p = add_cardinality_penalty(q, d=1, lam=2.0)
        assert p.offset == pytest.approx(1.0 + 2.0)

    @given(
        bits=st.lists(st.integers(0, 1), min_size=1, max_size=8),
        d=st.integers(1, 8),
        lam=st.floats(0.1, 10.0, allow_nan=False),
        seed=st.integers(0, 10),
    )
    def test_penalty_identity(self, bits, d, lam, seed):
        # energy(p, x) + lam*d^2 == energy(q, x) + lam*(popcount - d)^2
        n = len(bits)
        d = min(d, n)
        q = random_problem(n, seed)
        p = add_cardinality_penalty(q, d=d, lam=lam)
        x = np.array(bits)
        lhs = energy(p, x) + lam * d * d
        rhs = energy(q, x) + lam * (int(x.sum()) - d) ** 2
        assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_rejects_bad_cardinality(self):
        q = QuboProblem(np.zeros((3, 3)))
        with pytest.raises(ContractError):
            add_cardinality_penalty(q, d=4, lam=1.0)
        with pytest.raises(ContractError):
            add_cardinality_penalty(q, d=0, lam=1.0)

    def test_rejects_non_positive_weight(self):
        q = QuboProblem(np.zeros((3, 3)))
        with pytest.raises(ContractError):
            add_cardinality_penalty(q, d=1, lam=0.0)


class TestNormalize:
    def test_divides_by_max_abs(self):
        q = QuboProblem.from_terms(2, {(0, 0): 2.0, (0, 1): -4.0})
        out = normalize(q)
        assert out.matrix[0, 0] == pytest.approx(0.5)
        assert out.matrix[0, 1] == pytest.approx(-1.0)

    def test_offset_scaled_with_matrix(self):
        q = QuboProblem(np.array([[4.0]]), offset=2.0)
        assert normalize(q).offset == pytest.approx(0.5)

    def test_all_zero_unchanged(self):
        q = QuboProblem(np.zeros((3, 3)), offset=1.0)
        out = normalize(q)
        assert np.array_equal(out.matrix, q.matrix)
        assert out.offset == 1.0

    @given(seed=st.integers(0, 50), n=st.integers(1, 8))
    def test_idempotent_and_minimizer_preserved(self, seed, n):
        q = random_problem(n, seed)
        once = normalize(q)
        twice = normalize(once)
        assert np.abs(once.matrix).max() == pytest.approx(1.0)
        assert once.matrix == pytest.approx(twice.matrix)
        assert np.array_equal(brute_force(q).bits, brute_force(once).bits)


class TestBruteForce:
    def test_finds_minimum_of_two_variable_problem(self):
        # E = -x1 - x2 + 3 x1 x2; values: 0, -1, -1, 1. Two minima,
        # lexicographically smallest bit vector wins.
        q = QuboProblem.from_terms(2, {(0, 0): -1.0, (1, 1): -1.0, (0, 1): 3.0})
        sol = brute_force(q)
        assert tuple(sol.bits) == (0, 1)
        assert sol.energy == pytest.approx(-1.0)

    def test_chunked_scan_matches_single_chunk(self):
        q = random_problem(10, seed=4)
        small = brute_force(q, chunk=7)
        big = brute_force(q)
        assert np.array_equal(small.bits, big.bits)
        assert small.energy == pytest.approx(big.energy)

    @given(seed=st.integers(0, 30))
    @settings(max_examples=20, deadline=None)
    def test_matches_direct_enumeration(self, seed):
        q = random_problem(5, seed)
        best = min(
            (energy(q, [(k >> (4 - i)) & 1 for i in range(5)]) for k in range(32)),
        )
        assert brute_force(q).energy == pytest.approx(best)

    def test_energy_recompute_invariant(self):
        q = random_problem(8, seed=1)
        sol = brute_force(q)
        assert energy(q, sol.bits) == pytest.approx(sol.energy, abs=1e-10)

    def test_reported_energy_is_canonical(self):
        # bit-equal, not approx: the batch scan only ranks, the canonical
        # evaluator prices, so equal bits give equal floats across solvers
        for seed in range(5):
            q = random_problem(9, seed=seed)
            sol = brute_force(q)
            assert sol.energy == energy(q, sol.bits)

    def test_rejects_large_problems(self):
        with pytest.raises(ContractError):
            brute_force(QuboProblem(np.zeros((25, 25))))


class TestAnnealParams:
    def test_defaults(self):
        p = AnnealParams()
        assert p.sweeps == 2000
        assert p.beta_initial == pytest.approx(0.1)
        assert p.beta_final == pytest.approx(10.0)
        assert p.restarts == 8

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"sweeps": 0},
            {"restarts": 0},
            {"beta_initial": -1.0},
            {"beta_initial": 2.0, "beta_final": 1.0},
        ],
    )
    def test_rejects_bad_schedules(self, kwargs):
        with pytest.raises(ContractError):
            AnnealParams(**kwargs)


class TestSolveSA:
    def test_deterministic(self):
        q = random_problem(20, seed=9)
        a = solve_sa(q, AnnealParams(seed=5))
        b = solve_sa(q, AnnealParams(seed=5))
        assert np.array_equal(a.bits, b.bits)
        assert a.energy == b.energy

    def test_energy_recompute_invariant(self):
        q = random_problem(20, seed=2)
        sol = solve_sa(q, AnnealParams(seed=0))
        assert energy(q, sol.bits) == pytest.approx(sol.energy, abs=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_on_small_instances(self, seed):
        q = random_problem(12, seed=100 + seed)
        exact = brute_force(q)
        sol = solve_sa(q, AnnealParams(seed=seed))
        assert sol.energy == pytest.approx(exact.energy, abs=1e-9)
        assert np.array_equal(sol.bits, exact.bits)

    def test_tie_breaks_toward_lex_smallest(self):
        # Symmetric double minimum; the annealer must report (0, 1).
        q = QuboProblem.from_terms(2, {(0, 0): -1.0, (1, 1): -1.0, (0, 1): 3.0})
        sol = solve_sa(q, AnnealParams(sweeps=200, restarts=4, seed=0))
        assert tuple(sol.bits) == (0, 1)

    def test_single_variable(self):
        q = QuboProblem(np.array([[-2.0]]))
        sol = solve_sa(q, AnnealParams(sweeps=10, restarts=1, seed=0))
        assert tuple(sol.bits) == (1,)
        assert sol.energy == pytest.approx(-2.0)


class TestBinarySolution:
    def test_rejects_non_binary_bits(self):
        with pytest.raises(ContractError):
            BinarySolution(bits=np.array([0, 2]), energy=0.0)

    def test_bits_read_only(self):
        sol = BinarySolution(bits=np.array([0, 1]), energy=0.0)
        with pytest.raises(ValueError):
            sol.bits[0] = 1
