"""Second-order factorization-machine surrogate.

The model is  yhat(x) = w0 + sum_i w[i] x_i + sum_{i<j} <v_i, v_j> x_i x_j
over binary x, trained by SGD on half squared error against observed costs,
and exported exactly to a QUBO (the bias travels as the problem offset).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numba import njit

from .errors import ContractError
from .qubo import QuboProblem

DEFAULT_LATENT_DIM = 10


@dataclass(frozen=True)
class FmModel:
    """Factorization-machine parameters.

    Parameters
    ----------
    w0 : float
        Bias term.
    w : np.ndarray
        (n,) linear coefficients.
    v : np.ndarray
        (n, k) latent factors; the pairwise weight of (i, j) is the
        inner product of rows i and j.
    """

    w0: float
    w: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        v = np.array(self.v, dtype=np.float64, copy=True)
        if w.ndim != 1 or v.ndim != 2 or v.shape[0] != w.shape[0]:
            raise ContractError(
                f"parameter shapes disagree: w {w.shape}, v {v.shape}"
            )
        if v.shape[1] < 1:
            raise ContractError("latent dimension must be >= 1")
        if not (np.isfinite(self.w0) and np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise ContractError("model parameters must be finite")
        w.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def k(self) -> int:
        return self.v.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 0.01
    init_scale: float = 0.01
    l2: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ContractError("learning_rate must be positive")
        if not self.init_scale > 0:
            raise ContractError("init_scale must be positive")
        if self.l2 < 0:
            raise ContractError("l2 must be non-negative")


class SurrogateDataset:
    """Mutable collection of (bit vector, cost) training rows."""

    def __init__(self, n: int):
        if n < 1:
            raise ContractError("variable count must be >= 1")
        self.n = n
        self._bits: list[np.ndarray] = []
        self._costs: list[float] = []

    def __len__(self) -> int:
        return len(self._bits)

    def append(self, bits: Iterable[int] | np.ndarray, cost: float) -> None:
        b = np.asarray(bits, dtype=np.uint8)
        if b.shape != (self.n,) or not np.all((b <= 1)):
            raise ContractError(f"rows must be length-{self.n} 0/1 vectors")
        if not np.isfinite(cost):
            raise ContractError("cost must be finite")
        self._bits.append(b.copy())
        self._costs.append(float(cost))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (X, y) as an (m, n) 0/1 matrix and an (m,) cost vector."""
        if not self._bits:
            return np.zeros((0, self.n), dtype=np.uint8), np.zeros(0)
        return np.vstack(self._bits), np.array(self._costs)

    def contains(self, bits: np.ndarray) -> bool:
        b = np.asarray(bits, dtype=np.uint8)
        return any(np.array_equal(b, row) for row in self._bits)


def init_model(n: int, k: int = DEFAULT_LATENT_DIM, cfg: TrainConfig | None = None) -> FmModel:
    """Zero bias and linear terms, Normal(0, init_scale^2) latent factors."""
    if cfg is None:
        cfg = TrainConfig()
    if n < 1 or k < 1:
        raise ContractError("need n >= 1 and k >= 1")
    rng = np.random.default_rng([cfg.seed, 0])
    v = rng.normal(0.0, cfg.init_scale, size=(n, k))
    return FmModel(w0=0.0, w=np.zeros(n), v=v)


def _check_bits(m: FmModel, bits) -> np.ndarray:
    x = np.asarray(bits, dtype=np.float64)
    if x.shape != (m.n,):
        raise ContractError(f"expected a length-{m.n} bit vector, got shape {x.shape}")
    return x


def predict(m: FmModel, bits) -> float:
    """Evaluate the model via the O(nk) pairwise identity."""
    x = _check_bits(m, bits)
    s = x @ m.v
    # sum_{i<j} <v_i,v_j> x_i x_j = 1/2 sum_k [ (sum_i v_ik x_i)^2 - sum_i v_ik^2 x_i^2 ]
    pair = 0.5 * float(s @ s - (x * x) @ (m.v * m.v).sum(axis=1))
    return float(m.w0 + m.w @ x + pair)


def predict_many(m: FmModel, X: np.ndarray) -> np.ndarray:
    """Vectorized :func:`predict` over the rows of an (r, n) 0/1 matrix."""
    X = np.asarray(X, dtype=np.float64)
    s = X @ m.v
    pair = 0.5 * ((s * s).sum(axis=1) - (X * X) @ (m.v * m.v).sum(axis=1))
    return m.w0 + X @ m.w + pair


def gradient(m: FmModel, bits, target: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Gradient of the half squared error 1/2 (predict - target)^2.

    Returns (d/dw0, d/dw, d/dv). The latent part uses
    d predict / d v_ik = x_i * (sum_j v_jk x_j) - v_ik * x_i^2.
    """
    x = _check_bits(m, bits)
    r = predict(m, bits) - float(target)
    s = x @ m.v
    gv = r * (np.outer(x, s) - m.v * (x * x)[:, None])
    return r, r * x, gv


def mse(m: FmModel, data: SurrogateDataset) -> float:
    X, y = data.arrays()
    if len(y) == 0:
        raise ContractError("dataset is empty")
    return float(np.mean((predict_many(m, X) - y) ** 2))


@njit(cache=True)
def _sgd_epochs(w0, w, v, indptr, idx, costs, orders, lr, l2):
    """Run all SGD epochs in place; returns (final w0, per-epoch mean r^2).

    Rows are stored sparse (indices of set bits) so one update touches only
    the active rows of v. Gradients for a sample all use the pre-update
    latent sums s_k.
    """
    m = costs.shape[0]
    k = v.shape[1]
    s = np.empty(k)
    epoch_mse = np.empty(orders.shape[0])
    for e in range(orders.shape[0]):
        sq = 0.0
        for t in range(m):
            row = orders[e, t]
            lo, hi = indptr[row], indptr[row + 1]
            for kk in range(k):
                s[kk] = 0.0
            lin = 0.0
            vsq = 0.0
            for p in range(lo, hi):
                i = idx[p]
                lin += w[i]
                for kk in range(k):
                    s[kk] += v[i, kk]
                    vsq += v[i, kk] * v[i, kk]
            pair = 0.0
            for kk in range(k):
                pair += s[kk] * s[kk]
            pred = w0 + lin + 0.5 * (pair - vsq)
            r = pred - costs[row]
            sq += r * r
            w0 -= lr * (r + l2 * w0)
            for p in range(lo, hi):
                i = idx[p]
                w[i] -= lr * (r + l2 * w[i])
                for kk in range(k):
                    v[i, kk] -= lr * (r * (s[kk] - v[i, kk]) + l2 * v[i, kk])
        epoch_mse[e] = sq / m
    return w0, epoch_mse


def train(
    data: SurrogateDataset,
    n: int,
    k: int = DEFAULT_LATENT_DIM,
    cfg: TrainConfig | None = None,
    start: FmModel | None = None,
    return_history: bool = False,
):
    """Fit an FM to the dataset by shuffled-epoch SGD.

    Deterministic for a fixed config: the latent initialization and every
    epoch's visit order come from seed-derived streams. Pass ``start`` to
    continue from an existing model instead of a fresh initialization.
    With ``return_history`` the per-epoch mean squared residuals come back
    alongside the model.
    """
    if cfg is None:
        cfg = TrainConfig()
    if len(data) == 0:
        raise ContractError("dataset is empty")
    if data.n != n:
        raise ContractError(f"dataset has n={data.n}, requested n={n}")
    if start is None:
        start = init_model(n, k, cfg)
    elif start.n != n or start.k != k:
        raise ContractError("start model shape does not match (n, k)")

    X, y = data.arrays()
    m = len(y)
    # CSR layout of the set bits; rows are d-hot so this is what the
    # kernel's cost scales with, not n.
    idx_rows = [np.flatnonzero(row).astype(np.int64) for row in X]
    indptr = np.zeros(m + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([r.size for r in idx_rows])
    idx = np.concatenate(idx_rows) if m else np.zeros(0, dtype=np.int64)

    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    orders = shuffle_rng.permuted(
        np.broadcast_to(np.arange(m, dtype=np.int64), (cfg.epochs, m)), axis=1
    )

    w = np.array(start.w, copy=True)
    v = np.array(start.v, copy=True)
    w0, history = _sgd_epochs(
        start.w0, w, v, indptr, idx, y, orders, cfg.learning_rate, cfg.l2
    )
    model = FmModel(w0=float(w0), w=w, v=v)
    if return_history:
        return model, history
    return model


def to_qubo(m: FmModel) -> QuboProblem:
    """Export the FM exactly: Q_ii = w[i], Q_ij = <v_i, v_j>, offset = w0."""
    gram = m.v @ m.v.T
    mat = np.triu(gram, k=1)
    mat[np.diag_indices(m.n)] = m.w
    return QuboProblem(mat, offset=float(m.w0))
