"""Brute-force references that share no code with the Gray-code engine."""

import itertools
import math

import numpy as np
from scipy.special import logsumexp


def all_spins(n):
    """(2^n, n) array of every configuration, bit i set <=> sigma_i = +1."""
    words = np.arange(1 << n)
    return np.where((words[:, None] >> np.arange(n)) & 1, 1.0, -1.0)


def naive_energies(values, n, p):
    t = np.asarray(values, dtype=float).reshape((n,) * p)
    spins = all_spins(n)
    out = np.empty(len(spins))
    for row, s in enumerate(spins):
        total = 0.0
        for idx in itertools.product(range(n), repeat=p):
            prod = 1.0
            for i in idx:
                prod *= s[i]
            total += t[idx] * prod
        out[row] = total
    return out


def fast_energies(values, n, p):
    """Vectorised einsum energies (still full enumeration)."""
    t = np.asarray(values, dtype=float).reshape((n,) * p)
    spins = all_spins(n)
    letters = "abcdefgh"[:p]
    expr = letters + "," + ",".join("z" + c for c in letters) + "->z"
    return np.einsum(expr, t, *([spins] * p))


def naive_log_z(values, n, p, beta, h, energies=None):
    e = fast_energies(values, n, p) if energies is None else energies
    mag = all_spins(n).sum(axis=1)
    b = beta / math.sqrt(n ** (p - 1))
    return float(logsumexp(b * e + h * mag) - n * math.log(2.0))


def naive_gibbs(values, n, p, beta, h, f_values):
    e = fast_energies(values, n, p)
    mag = all_spins(n).sum(axis=1)
    b = beta / math.sqrt(n ** (p - 1))
    lw = b * e + h * mag
    w = np.exp(lw - lw.max())
    return float(np.asarray(f_values) @ w / w.sum())


def exact_discrete_ground_state_mean(atoms, probs, n, p=2):
    """E S_n by enumerating every coupling tensor drawn from a finite law."""
    d = n**p
    total = 0.0
    for combo in itertools.product(range(len(atoms)), repeat=d):
        vals = np.array([atoms[c] for c in combo])
        weight = float(np.prod([probs[c] for c in combo]))
        e = fast_energies(vals, n, p)
        total += weight * e.max()
    return total
