"""Exact thermodynamics by full enumeration of the 2^n spin configurations.

    Z_n = 2^-n sum_sigma exp(b H(sigma) + h sum_i sigma_i),  b = beta / sqrt(n^(p-1))

The 2^-n normalisation is kept, so ``log_partition`` is exactly 0 at
beta = h = 0 and equals n log cosh h at beta = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CapacityError, ValidationError
from .spin_model import CouplingTensor, ModelParams, SpinConfiguration, symmetrize, symmetrize_batch

# default exact-enumeration limits per p; p not listed falls back to "default"
ENGINE_LIMITS = {2: 24, 3: 14, "default": 12}

TIE_TOL = 1e-12
LOG2 = math.log(2.0)


@dataclass(frozen=True)
class LogPartitionResult:
    log_z: float
    n: int
    beta: float
    h: float
    enumerated_count: int


@dataclass(frozen=True)
class GroundStateResult:
    s_n: float
    argmax: SpinConfiguration
    degeneracy_hint: int


@dataclass(frozen=True)
class InterpolationPoint:
    t: float
    x: float
    log_z_tx: float


def engine_limit(p: int, limit: int | None = None) -> int:
    if limit is not None:
        return limit
    return ENGINE_LIMITS.get(p, ENGINE_LIMITS["default"])


def check_capacity(n: int, p: int, limit: int | None = None) -> None:
    lim = engine_limit(p, limit)
    if n > lim:
        raise CapacityError(n, p, lim)


def _check(couplings: CouplingTensor, params: ModelParams, limit):
    if couplings.n != params.n or couplings.p != params.p:
        raise ValidationError(
            f"couplings (n={couplings.n}, p={couplings.p}) do not match params (n={params.n}, p={params.p})"
        )
    check_capacity(params.n, params.p, limit)


def log_sum(couplings: CouplingTensor, b: float, h: float) -> float:
    """log sum_sigma exp(b H + h M), no 2^-n factor, b already scaled."""
    if couplings.p == 2:
        sym = symmetrize(couplings)
        return float(_kernels.p2_log_sum(sym.pair, sym.diagonal_sum, float(b), float(h)))
    return float(_kernels.pspin_log_sum(couplings.values, couplings.n, couplings.p, float(b), float(h)))


def log_partition(couplings: CouplingTensor, params: ModelParams, limit: int | None = None) -> LogPartitionResult:
    _check(couplings, params, limit)
    lz = log_sum(couplings, params.scaled_beta, params.h) - params.n * LOG2
    return LogPartitionResult(lz, params.n, params.beta, params.h, 1 << params.n)


def log_weights(couplings: CouplingTensor, params: ModelParams, limit: int | None = None):
    """Gray-ordered (words, log-weights); the weights are unnormalised."""
    _check(couplings, params, limit)
    b, h = float(params.scaled_beta), float(params.h)
    if couplings.p == 2:
        sym = symmetrize(couplings)
        return _kernels.p2_log_weights(sym.pair, sym.diagonal_sum, b, h)
    return _kernels.pspin_log_weights(couplings.values, couplings.n, couplings.p, b, h)


def gibbs_expectation(couplings: CouplingTensor, params: ModelParams, observable, limit: int | None = None) -> float:
    """<f(sigma)> under the Gibbs measure; ``observable`` maps SpinConfiguration -> float.

    Sum f*w and sum w are accumulated jointly against the common max
    log-weight, so negative f is handled without a log of a signed sum.
    """
    words, logw = log_weights(couplings, params, limit)
    shift = logw.max()
    num = 0.0
    den = 0.0
    n = params.n
    for word, lw in zip(words.tolist(), logw.tolist()):
        w = math.exp(lw - shift)
        num += observable(SpinConfiguration(n, word)) * w
        den += w
    return num / den


def spin_product_moments(couplings: CouplingTensor, params: ModelParams, indices, max_power: int = 3,
                         limit: int | None = None) -> np.ndarray:
    """Gibbs moments <X^k>, k = 1..max_power, of X = prod_{i in indices} sigma_i."""
    words, logw = log_weights(couplings, params, limit)
    w = np.exp(logw - logw.max())
    parity = np.zeros(words.shape, dtype=np.int64)
    for i in indices:
        # count the -1 factors
        parity += 1 - ((words >> i) & 1)
    x = np.where(parity % 2 == 0, 1.0, -1.0)
    den = w.sum()
    return np.array([float((x**k) @ w / den) for k in range(1, max_power + 1)])


def ground_state(couplings: CouplingTensor, limit: int | None = None) -> GroundStateResult:
    """Exact max_sigma H(sigma).

    For p=2 the top spin is pinned (H is even under sigma -> -sigma), so
    only 2^(n-1) words are scanned and the tie count is doubled.
    """
    n, p = couplings.n, couplings.p
    check_capacity(n, p, limit)
    if p == 2:
        sym = symmetrize(couplings)
        best, word, ties = _kernels.p2_ground_state(sym.pair, sym.diagonal_sum, TIE_TOL)
        ties *= 2
    else:
        best, word, ties = _kernels.pspin_ground_state(couplings.values, n, p, TIE_TOL)
    return GroundStateResult(float(best), SpinConfiguration(n, int(word)), int(ties))


def interpolated_log_partition(g_couplings: CouplingTensor, xi_couplings: CouplingTensor, t: float, x: float,
                               h: float = 0.0, limit: int | None = None) -> InterpolationPoint:
    """log E exp(sqrt(t) H_g / sqrt(n^(p-1)) + sqrt(x) H_xi / sqrt(n^(p-1)) + h M).

    H is linear in the couplings, so this is ``log_partition`` of the
    mixed tensor sqrt(t) g + sqrt(x) xi at beta = 1.
    """
    if (g_couplings.n, g_couplings.p) != (xi_couplings.n, xi_couplings.p):
        raise ValidationError("g and xi tensors must share (n, p)")
    if t < 0 or x < 0:
        raise ValidationError(f"t and x must be >= 0, got t={t}, x={x}")
    mixed = CouplingTensor(
        g_couplings.n, g_couplings.p, math.sqrt(t) * g_couplings.values + math.sqrt(x) * xi_couplings.values
    )
    params = ModelParams(mixed.n, mixed.p, beta=1.0, h=h)
    return InterpolationPoint(float(t), float(x), log_partition(mixed, params, limit).log_z)


# ---------------------------------------------------------------- batched paths used by the estimators


def batch_log_partition(values: np.ndarray, params: ModelParams, limit: int | None = None) -> np.ndarray:
    """log Z for a stack of flat coupling tensors (shape (R, n^p))."""
    n, p = params.n, params.p
    check_capacity(n, p, limit)
    values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1, n**p)
    b, h = float(params.scaled_beta), float(params.h)
    if p == 2:
        pair, c0 = symmetrize_batch(values, n)
        out = _kernels.p2_log_sum_batch(pair, c0, b, h)
    else:
        out = _kernels.pspin_log_sum_batch(values, n, p, b, h)
    return out - n * LOG2


def batch_ground_state(values: np.ndarray, n: int, p: int, limit: int | None = None) -> np.ndarray:
    check_capacity(n, p, limit)
    values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1, n**p)
    if p == 2:
        pair, c0 = symmetrize_batch(values, n)
        return _kernels.p2_ground_state_batch(pair, c0, TIE_TOL)
    return _kernels.pspin_ground_state_batch(values, n, p, TIE_TOL)
