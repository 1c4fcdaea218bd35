"""QUBO problems, cardinality penalties, and solvers.

A problem is the quadratic form  E(x) = sum_{i<=j} Q[i,j] x_i x_j  over binary
x, stored as an upper-triangular matrix whose diagonal holds the linear terms.
``solve_sa`` is a restart-based single-bit-flip Metropolis annealer;
``brute_force`` is the exact oracle for small instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from numba import njit

from .errors import ContractError

BRUTE_FORCE_MAX_VARS = 24


@dataclass(frozen=True)
class QuboProblem:
    """Upper-triangular QUBO coefficients plus a constant bookkeeping term.

    Parameters
    ----------
    matrix : np.ndarray
        (n, n) float matrix; entries below the diagonal must be zero,
        the diagonal holds the linear coefficients.
    offset : float
        Constant term excluded from :func:`energy` (e.g. the bias a
        model export dropped, or the constant a penalty expansion drops).
    """

    matrix: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractError(f"matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ContractError("matrix contains non-finite coefficients")
        if m.shape[0] and np.any(np.tril(m, k=-1) != 0.0):
            raise ContractError("coefficients below the diagonal must be zero")
        if not np.isfinite(self.offset):
            raise ContractError("offset must be finite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_terms(
        cls,
        n: int,
        terms: Mapping[tuple[int, int], float],
        offset: float = 0.0,
    ) -> "QuboProblem":
        """Build a problem from a sparse {(i, j): coefficient} map with i <= j."""
        m = np.zeros((n, n))
        for (i, j), val in terms.items():
            if not (0 <= i <= j < n):
                raise ContractError(f"term index ({i}, {j}) out of range for n={n}")
            m[i, j] += val
        return cls(m, offset=offset)


@dataclass(frozen=True)
class BinarySolution:
    """A binary assignment together with its quadratic-form value."""

    bits: np.ndarray
    energy: float

    def __post_init__(self):
        b = np.array(self.bits, dtype=np.uint8, copy=True)
        if b.ndim != 1 or not np.all((b == 0) | (b == 1)):
            raise ContractError("bits must be a flat 0/1 vector")
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)


@dataclass(frozen=True)
class AnnealParams:
    """Simulated-annealing schedule and reproducibility knobs.

    Each restart owns an RNG stream derived from (seed, restart index),
    so results do not depend on execution order.
    """

    sweeps: int = 2000
    beta_initial: float = 0.1
    beta_final: float = 10.0
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1:
            raise ContractError("sweeps must be >= 1")
        if self.restarts < 1:
            raise ContractError("restarts must be >= 1")
        if not (0 < self.beta_initial < self.beta_final):
            raise ContractError("need 0 < beta_initial < beta_final")


def _as_bits(bits: Iterable[int] | np.ndarray, n: int) -> np.ndarray:
    b = np.asarray(bits)
    if b.shape != (n,):
        raise ContractError(f"expected a length-{n} bit vector, got shape {b.shape}")
    if not np.all((b == 0) | (b == 1)):
        raise ContractError("bit vector entries must be 0 or 1")
    return b.astype(np.float64)


def energy(q: QuboProblem, bits: Iterable[int] | np.ndarray) -> float:
    """Evaluate sum_{i<=j} Q[i,j] x_i x_j at a binary assignment."""
    x = _as_bits(bits, q.n)
    return float(x @ q.matrix @ x)


def add_cardinality_penalty(q: QuboProblem, d: int, lam: float) -> QuboProblem:
    """Add the quadratic expansion of lam * (sum_i x_i - d)^2.

    The expansion shifts every diagonal term by lam*(1 - 2d) and every
    off-diagonal term by 2*lam; the constant lam*d^2 it drops is
    accumulated into ``offset`` so the full penalty value can be
    reconstructed:  energy(q') + lam*d^2 == energy(q) + lam*(popcount - d)^2.
    """
    if not 1 <= d <= q.n:
        raise ContractError(f"cardinality d={d} out of range for n={q.n}")
    if not lam > 0:
        raise ContractError("penalty weight must be positive")
    m = np.array(q.matrix, copy=True)
    m[np.diag_indices(q.n)] += lam * (1 - 2 * d)
    m[np.triu_indices(q.n, k=1)] += 2.0 * lam
    return QuboProblem(m, offset=q.offset + lam * d * d)


def normalize(q: QuboProblem) -> QuboProblem:
    """Divide all coefficients by the maximum absolute coefficient.

    The offset is scaled by the same factor so the affine energy stays
    proportional to the original. An all-zero problem is returned unchanged.
    """
    max_abs = float(np.abs(q.matrix).max(initial=0.0))
    if max_abs == 0.0:
        return q
    return QuboProblem(q.matrix / max_abs, offset=q.offset / max_abs)


@njit(cache=True)
def _lex_less(a, b):
    for i in range(a.shape[0]):
        if a[i] != b[i]:
            return a[i] < b[i]
    return False


@njit(cache=True)
def _anneal_restart(lin, couple, bits, betas, uniforms):
    """One Metropolis restart; mutates ``bits`` and returns the best visited.

    ``couple`` is the symmetrized coupling matrix with zero diagonal, so the
    local field h[i] = lin[i] + couple[i] @ x never depends on x_i and the
    flip cost is (1 - 2 x_i) * h[i].
    """
    n = bits.shape[0]
    h = np.empty(n)
    for i in range(n):
        acc = lin[i]
        for j in range(n):
            if bits[j] == 1:
                acc += couple[i, j]
        h[i] = acc
    e = 0.0
    for i in range(n):
        if bits[i] == 1:
            e += lin[i]
            for j in range(i + 1, n):
                if bits[j] == 1:
                    e += couple[i, j]
    best = bits.copy()
    best_e = e
    for t in range(betas.shape[0]):
        beta = betas[t]
        for i in range(n):
            delta = h[i] if bits[i] == 0 else -h[i]
            if delta <= 0.0 or uniforms[t, i] < np.exp(-beta * delta):
                step = 1 if bits[i] == 0 else -1
                bits[i] += step
                e += delta
                for j in range(n):
                    h[j] += step * couple[j, i]
                if e < best_e or (e == best_e and _lex_less(bits, best)):
                    best_e = e
                    best[:] = bits
    return best


def _beta_schedule(params: AnnealParams) -> np.ndarray:
    if params.sweeps == 1:
        return np.array([params.beta_initial])
    ratio = params.beta_final / params.beta_initial
    return params.beta_initial * ratio ** (
        np.arange(params.sweeps) / (params.sweeps - 1)
    )


def solve_sa(q: QuboProblem, params: AnnealParams | None = None) -> BinarySolution:
    """Minimize by restarted single-bit-flip Metropolis annealing.

    Deterministic for fixed (q, params). Sweeps visit bits in index order
    under a geometric inverse-temperature schedule; the lowest-energy
    configuration seen across all restarts wins, with energy ties broken
    toward the lexicographically smallest bit vector.
    """
    if params is None:
        params = AnnealParams()
    if q.n < 1:
        raise ContractError("problem must have at least one variable")
    lin = np.ascontiguousarray(np.diag(q.matrix))
    couple = q.matrix + q.matrix.T
    np.fill_diagonal(couple, 0.0)
    couple = np.ascontiguousarray(couple)
    betas = _beta_schedule(params)

    best_bits: np.ndarray | None = None
    best_e = np.inf
    for r in range(params.restarts):
        rng = np.random.default_rng([params.seed, r])
        start = rng.integers(0, 2, size=q.n).astype(np.int8)
        uniforms = rng.random((params.sweeps, q.n))
        cand = _anneal_restart(lin, couple, start, betas, uniforms)
        # Rank restarts on exactly recomputed energies, not the drifting
        # incremental accumulator.
        cand_e = energy(q, cand)
        if (
            best_bits is None
            or cand_e < best_e
            or (cand_e == best_e and tuple(cand) < tuple(best_bits))
        ):
            best_bits = cand
            best_e = cand_e
    assert best_bits is not None
    return BinarySolution(bits=best_bits, energy=best_e)


def brute_force(q: QuboProblem, chunk: int = 1 << 16) -> BinarySolution:
    """Exact minimum by enumerating all 2^n assignments (n <= 24).

    Assignments are scanned in lexicographic bit-vector order, so energy
    ties resolve to the lexicographically smallest vector.
    """
    n = q.n
    if n > BRUTE_FORCE_MAX_VARS:
        raise ContractError(
            f"brute force is capped at n={BRUTE_FORCE_MAX_VARS}, got n={n}"
        )
    if n < 1:
        raise ContractError("problem must have at least one variable")
    # Bit i of the vector is taken from position n-1-i of the counter, so
    # counter order == lexicographic vector order.
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    total = 1 << n
    best_e = np.inf
    best_k = 0
    for start in range(0, total, chunk):
        ks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        x = ((ks[:, None] >> shifts[None, :]) & 1).astype(np.float64)
        energies = ((x @ q.matrix) * x).sum(axis=1)
        arg = int(np.argmin(energies))
        if energies[arg] < best_e:
            best_e = float(energies[arg])
            best_k = int(ks[arg])
    bits = ((best_k >> shifts) & 1).astype(np.uint8)
    # The batch energies only rank candidates; report the winner through
    # the canonical evaluator so equal bits imply bit-equal energies
    # across solvers.
    return BinarySolution(bits=bits, energy=energy(q, bits))
