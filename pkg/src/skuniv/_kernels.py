"""Numba kernels for Gray-code enumeration.

Configurations are N-bit words, bit i set <=> sigma_i = +1.  Every scan
starts at the all-minus word and visits the reflected Gray code sequence,
so step i flips spin ``ctz(i)``.  Log-weights are folded into a running
(max, rescaled-sum) pair, so nothing is materialised and nothing overflows.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _ctz(i):
    k = 0
    while (i & 1) == 0:
        i >>= 1
        k += 1
    return k


@njit(cache=True)
def _lse_push(m, acc, w):
    if w > m:
        return w, acc * np.exp(m - w) + 1.0
    return m, acc + np.exp(w - m)


# ---------------------------------------------------------------- p = 2


@njit(cache=True)
def _p2_start(pair, c0, sig, field):
    """Reset to all-minus; return its energy. ``pair`` is symmetric, zero diagonal."""
    n = pair.shape[0]
    e = c0
    for i in range(n):
        sig[i] = -1.0
    for i in range(n):
        f = 0.0
        for j in range(n):
            f -= pair[i, j]
        field[i] = f
        for j in range(i + 1, n):
            e += pair[i, j]
    return e


@njit(cache=True)
def _p2_flip(pair, sig, field, k):
    """Flip spin k in place, update local fields, return the energy change."""
    s = sig[k]
    delta = -2.0 * s * field[k]
    n = pair.shape[0]
    for j in range(n):
        field[j] -= 2.0 * s * pair[j, k]
    sig[k] = -s
    return delta


@njit(cache=True)
def p2_log_sum(pair, c0, b, h):
    """log sum_sigma exp(b*H(sigma) + h*M(sigma)) over all 2^n words."""
    n = pair.shape[0]
    sig = np.empty(n)
    field = np.empty(n)
    e = _p2_start(pair, c0, sig, field)
    mag = -float(n)
    m = b * e + h * mag
    acc = 1.0
    for i in range(1, 1 << n):
        k = _ctz(i)
        mag -= 2.0 * sig[k]
        e += _p2_flip(pair, sig, field, k)
        m, acc = _lse_push(m, acc, b * e + h * mag)
    return m + np.log(acc)


@njit(cache=True)
def p2_log_sum_batch(pairs, c0s, b, h):
    out = np.empty(pairs.shape[0])
    for r in range(pairs.shape[0]):
        out[r] = p2_log_sum(pairs[r], c0s[r], b, h)
    return out


@njit(cache=True)
def p2_ground_state(pair, c0, tol):
    """Max energy with the top spin pinned to -1 (global-flip symmetry).

    Returns (max, argmax word, tie count over the half scan).
    """
    n = pair.shape[0]
    sig = np.empty(n)
    field = np.empty(n)
    e = _p2_start(pair, c0, sig, field)
    best = e
    best_word = 0
    ties = 1
    word = 0
    for i in range(1, 1 << (n - 1)):
        k = _ctz(i)
        e += _p2_flip(pair, sig, field, k)
        word ^= 1 << k
        if e > best + tol:
            best = e
            best_word = word
            ties = 1
        elif abs(e - best) <= tol:
            ties += 1
            if e > best:
                best = e
                best_word = word
    return best, best_word, ties


@njit(cache=True)
def p2_ground_state_batch(pairs, c0s, tol):
    out = np.empty(pairs.shape[0])
    for r in range(pairs.shape[0]):
        out[r] = p2_ground_state(pairs[r], c0s[r], tol)[0]
    return out


@njit(cache=True)
def p2_log_weights(pair, c0, b, h):
    """Gray-ordered words and their log-weights (small n only)."""
    n = pair.shape[0]
    count = 1 << n
    words = np.empty(count, dtype=np.int64)
    logw = np.empty(count)
    sig = np.empty(n)
    field = np.empty(n)
    e = _p2_start(pair, c0, sig, field)
    mag = -float(n)
    word = 0
    words[0] = 0
    logw[0] = b * e + h * mag
    for i in range(1, count):
        k = _ctz(i)
        mag -= 2.0 * sig[k]
        e += _p2_flip(pair, sig, field, k)
        word ^= 1 << k
        words[i] = word
        logw[i] = b * e + h * mag
    return words, logw


# ---------------------------------------------------------------- general p


@njit(cache=True)
def pspin_flip_delta(values, n, p, sig, k):
    """H(sigma with k flipped) - H(sigma), touching only tuples containing k.

    A tuple where k appears m times changes sign iff m is odd, so
    delta = -2 * sum_{t contains k, m_t odd} xi_t prod sigma_t.
    Tuples are enumerated once each by the first position holding k.
    """
    idx = np.empty(p, dtype=np.int64)
    acc = 0.0
    for q in range(p):
        # positions < q range over n-1 values (skip k); positions > q over n
        total = 1
        for pos in range(p):
            if pos < q:
                total *= n - 1
            elif pos > q:
                total *= n
        for code in range(total):
            c = code
            for pos in range(p - 1, -1, -1):
                if pos == q:
                    idx[pos] = k
                elif pos < q:
                    v = c % (n - 1)
                    c //= n - 1
                    idx[pos] = v if v < k else v + 1
                else:
                    idx[pos] = c % n
                    c //= n
            mult = 0
            flat = 0
            prod = 1.0
            for pos in range(p):
                flat = flat * n + idx[pos]
                if idx[pos] == k:
                    mult += 1
                prod *= sig[idx[pos]]
            if mult % 2 == 1:
                acc += values[flat] * prod
    return -2.0 * acc


@njit(cache=True)
def _pspin_start(values, n, p, sig):
    for i in range(n):
        sig[i] = -1.0
    total = 0.0
    for t in range(values.shape[0]):
        total += values[t]
    if p % 2 == 1:
        return -total
    return total


@njit(cache=True)
def pspin_log_sum(values, n, p, b, h):
    sig = np.empty(n)
    e = _pspin_start(values, n, p, sig)
    mag = -float(n)
    m = b * e + h * mag
    acc = 1.0
    for i in range(1, 1 << n):
        k = _ctz(i)
        e += pspin_flip_delta(values, n, p, sig, k)
        mag -= 2.0 * sig[k]
        sig[k] = -sig[k]
        m, acc = _lse_push(m, acc, b * e + h * mag)
    return m + np.log(acc)


@njit(cache=True)
def pspin_log_sum_batch(values, n, p, b, h):
    out = np.empty(values.shape[0])
    for r in range(values.shape[0]):
        out[r] = pspin_log_sum(values[r], n, p, b, h)
    return out


@njit(cache=True)
def pspin_ground_state(values, n, p, tol):
    sig = np.empty(n)
    e = _pspin_start(values, n, p, sig)
    best = e
    best_word = 0
    ties = 1
    word = 0
    for i in range(1, 1 << n):
        k = _ctz(i)
        e += pspin_flip_delta(values, n, p, sig, k)
        sig[k] = -sig[k]
        word ^= 1 << k
        if e > best + tol:
            best = e
            best_word = word
            ties = 1
        elif abs(e - best) <= tol:
            ties += 1
            if e > best:
                best = e
                best_word = word
    return best, best_word, ties


@njit(cache=True)
def pspin_ground_state_batch(values, n, p, tol):
    out = np.empty(values.shape[0])
    for r in range(values.shape[0]):
        out[r] = pspin_ground_state(values[r], n, p, tol)[0]
    return out


@njit(cache=True)
def pspin_log_weights(values, n, p, b, h):
    count = 1 << n
    words = np.empty(count, dtype=np.int64)
    logw = np.empty(count)
    sig = np.empty(n)
    e = _pspin_start(values, n, p, sig)
    mag = -float(n)
    word = 0
    words[0] = 0
    logw[0] = b * e + h * mag
    for i in range(1, count):
        k = _ctz(i)
        e += pspin_flip_delta(values, n, p, sig, k)
        mag -= 2.0 * sig[k]
        sig[k] = -sig[k]
        word ^= 1 << k
        words[i] = word
        logw[i] = b * e + h * mag
    return words, logw
