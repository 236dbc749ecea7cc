"""Spin configurations, coupling tensors and Hamiltonians.

The Hamiltonian of the p-spin model with couplings xi is

    H(sigma) = sum_{i1..ip} xi[i1..ip] sigma_i1 ... sigma_ip

with diagonal terms included.  The engine applies the temperature
scaling beta / sqrt(n**(p-1)) itself; everything here is unscaled.
Spin indices are 0-based.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import _kernels
from .errors import ValidationError

if TYPE_CHECKING:
    from .disorder import EnvironmentSpec


@dataclass(frozen=True)
class SpinConfiguration:
    """sigma in {-1,+1}^n packed into an int; bit i set <=> sigma_i = +1."""

    n: int
    bits: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.bits < 0 or self.bits >> self.n:
            raise ValidationError(f"bits {self.bits:#x} set outside 0..{self.n - 1}")

    @classmethod
    def from_spins(cls, spins) -> "SpinConfiguration":
        spins = np.asarray(spins)
        if not np.all(np.abs(spins) == 1):
            raise ValidationError("spins must be +1 or -1")
        bits = 0
        for i, s in enumerate(spins):
            if s > 0:
                bits |= 1 << i
        return cls(len(spins), bits)

    def spins(self) -> np.ndarray:
        return np.array([1.0 if (self.bits >> i) & 1 else -1.0 for i in range(self.n)])

    def flip(self, k: int) -> "SpinConfiguration":
        if not 0 <= k < self.n:
            raise ValidationError(f"spin index {k} out of range for n={self.n}")
        return SpinConfiguration(self.n, self.bits ^ (1 << k))

    def negate(self) -> "SpinConfiguration":
        return SpinConfiguration(self.n, self.bits ^ ((1 << self.n) - 1))

    @property
    def magnetization(self) -> int:
        up = bin(self.bits).count("1")
        return 2 * up - self.n


@dataclass(frozen=True, eq=False)
class CouplingTensor:
    """One disorder realization: ``n**p`` values in row-major (i1,...,ip) order."""

    n: int
    p: int
    values: np.ndarray
    env: "EnvironmentSpec | None" = None
    seed: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.p < 2:
            raise ValidationError("need n >= 1 and p >= 2")
        values = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if values.size != self.n**self.p:
            raise ValidationError(f"expected {self.n ** self.p} values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("coupling values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def env_id(self) -> str | None:
        return None if self.env is None else self.env.env_id

    def tensor(self) -> np.ndarray:
        return self.values.reshape((self.n,) * self.p)

    def scaled(self, factor: float) -> "CouplingTensor":
        return CouplingTensor(self.n, self.p, factor * self.values, self.env, self.seed)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "values": [float(v) for v in self.values],
            "env": None if self.env is None else self.env.to_json(),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CouplingTensor":
        from .disorder import EnvironmentSpec

        env = obj.get("env")
        return cls(
            n=int(obj["n"]),
            p=int(obj["p"]),
            values=np.asarray(obj["values"], dtype=np.float64),
            env=None if env is None else EnvironmentSpec.from_json(env),
            seed=obj.get("seed"),
        )


@dataclass(frozen=True)
class ModelParams:
    n: int
    p: int = 2
    beta: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.p < 2:
            raise ValidationError("p must be >= 2")
        if not (math.isfinite(self.beta) and math.isfinite(self.h)):
            raise ValidationError("beta and h must be finite")

    @property
    def scaled_beta(self) -> float:
        """beta / sqrt(n**(p-1)), the factor multiplying H in the exponent."""
        return self.beta / math.sqrt(float(self.n) ** (self.p - 1))


@dataclass(frozen=True, eq=False)
class SymmetrizedCouplings:
    """p=2 couplings regrouped as c0 + sum_{i<j} s_ij sigma_i sigma_j.

    ``pair`` is the full symmetric matrix with s_ij = xi_ij + xi_ji off the
    diagonal and zeros on it; ``diagonal_sum`` is c0 = sum_i xi_ii.
    """

    n: int
    pair: np.ndarray = field(repr=False)
    diagonal_sum: float

    @property
    def pair_sums(self) -> np.ndarray:
        """s_ij for i < j in row-major upper-triangle order."""
        return self.pair[np.triu_indices(self.n, k=1)]

    def energy(self, sigma: SpinConfiguration) -> float:
        s = sigma.spins()
        return self.diagonal_sum + 0.5 * float(s @ self.pair @ s)


def symmetrize(couplings: CouplingTensor) -> SymmetrizedCouplings:
    if couplings.p != 2:
        raise ValidationError(f"symmetrize needs p=2, got p={couplings.p}")
    J = couplings.tensor()
    pair = J + J.T
    np.fill_diagonal(pair, 0.0)
    return SymmetrizedCouplings(couplings.n, np.ascontiguousarray(pair), float(np.trace(J)))


def symmetrize_batch(values: np.ndarray, n: int):
    """Vectorized :func:`symmetrize` over a stack of flat p=2 tensors."""
    J = values.reshape(-1, n, n)
    pair = J + J.transpose(0, 2, 1)
    idx = np.arange(n)
    pair[:, idx, idx] = 0.0
    c0 = np.trace(J, axis1=1, axis2=2)
    return np.ascontiguousarray(pair), np.ascontiguousarray(c0)


def _check_dims(couplings, sigma):
    if couplings.n != sigma.n:
        raise ValidationError(f"dimension mismatch: couplings n={couplings.n}, sigma n={sigma.n}")


def energy(couplings: CouplingTensor, sigma: SpinConfiguration) -> float:
    """Unscaled Hamiltonian H(sigma)."""
    _check_dims(couplings, sigma)
    t = couplings.tensor()
    s = sigma.spins()
    for _ in range(couplings.p):
        t = t @ s
    return float(t)


def flip_delta(couplings, sigma: SpinConfiguration, k: int) -> float:
    """H(sigma with spin k flipped) - H(sigma).

    Accepts a :class:`CouplingTensor` or :class:`SymmetrizedCouplings`.
    p=2 costs O(n); p>=3 sums the O(p n^(p-1)) tuples containing k.
    """
    _check_dims(couplings, sigma)
    if not 0 <= k < sigma.n:
        raise ValidationError(f"spin index {k} out of range for n={sigma.n}")
    s = sigma.spins()
    if isinstance(couplings, SymmetrizedCouplings):
        pair = couplings.pair
    elif couplings.p == 2:
        pair = symmetrize(couplings).pair
    else:
        return float(_kernels.pspin_flip_delta(couplings.values, couplings.n, couplings.p, s, k))
    return float(-2.0 * s[k] * (pair[k] @ s))


def tilted_probabilities(h: float) -> tuple[float, float]:
    """P(tau=+1), P(tau=-1) for the field-tilted spin law e^{+-h} / (2 cosh h)."""
    if not math.isfinite(h):
        raise ValidationError("h must be finite")
    p_plus = 1.0 / (1.0 + math.exp(-2.0 * h)) if h >= 0 else math.exp(2.0 * h) / (1.0 + math.exp(2.0 * h))
    return p_plus, 1.0 - p_plus


def export_energies_csv(couplings: CouplingTensor, path) -> None:
    """Debug dump: one row per configuration (bits, energy); small n only."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bits", "energy"])
        for bits in range(1 << couplings.n):
            w.writerow([bits, f"{energy(couplings, SpinConfiguration(couplings.n, bits)):.17g}"])
