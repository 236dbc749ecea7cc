import json
import math
from pathlib import Path

import numpy as np
import pytest

from oracles import all_spins, fast_energies, naive_gibbs, naive_log_z
from skuniv.disorder import EnvironmentSpec, sample_couplings
from skuniv.errors import CapacityError, ValidationError
from skuniv.exact_engine import (
    batch_ground_state,
    batch_log_partition,
    gibbs_expectation,
    ground_state,
    interpolated_log_partition,
    log_partition,
    spin_product_moments,
)
from skuniv.spin_model import CouplingTensor, ModelParams, SpinConfiguration, energy

FIXTURES = Path(__file__).parent / "fixtures"
TWO = CouplingTensor(2, 2, [0.5, 1.0, 0.2, -0.3])


def gaussian_tensor(n, p, seed):
    return sample_couplings(EnvironmentSpec("gaussian"), n, p, seed)


def test_single_spin_closed_form():
    t = CouplingTensor(1, 2, [0.8])
    for beta, h in [(1.0, 0.0), (-2.5, 0.7), (0.3, -1.2)]:
        got = log_partition(t, ModelParams(1, 2, beta, h)).log_z
        assert got == pytest.approx(beta * 0.8 + math.log(math.cosh(h)), abs=1e-12)


def test_two_spin_example():
    res = log_partition(TWO, ModelParams(2, 2, 1.0, 0.0))
    b = 1 / math.sqrt(2)
    closed = b * (0.5 - 0.3) + math.log(math.cosh(b * 1.2))
    # frozen from direct four-term enumeration
    assert res.log_z == pytest.approx(0.465043612040496, abs=1e-12)
    assert res.log_z == pytest.approx(closed, abs=1e-12)
    assert res.enumerated_count == 4


def test_beta_zero_is_field_only():
    t = gaussian_tensor(5, 2, 3)
    assert log_partition(t, ModelParams(5, 2, 0.0, 0.3)).log_z == pytest.approx(5 * math.log(math.cosh(0.3)), abs=1e-12)
    assert log_partition(t, ModelParams(5, 2, 0.0, 0.0)).log_z == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("n,p", [(1, 2), (4, 2), (9, 2), (3, 3), (6, 3), (3, 4)])
def test_matches_naive_enumeration(n, p):
    rng = np.random.default_rng(n * 10 + p)
    for _ in range(5):
        t = CouplingTensor(n, p, rng.standard_normal(n**p))
        beta, h = rng.uniform(-2, 2), rng.uniform(-1, 1)
        got = log_partition(t, ModelParams(n, p, beta, h)).log_z
        assert got == pytest.approx(naive_log_z(t.values, n, p, beta, h), rel=1e-10, abs=1e-12)


def test_json_fixtures():
    for case in json.loads((FIXTURES / "log_z_cases.json").read_text()):
        t = CouplingTensor.from_json(case["tensor"])
        got = log_partition(t, ModelParams(t.n, t.p, case["beta"], case["h"])).log_z
        assert got == pytest.approx(case["log_z"], rel=1e-10)


def test_no_overflow_at_large_beta():
    t = gaussian_tensor(10, 2, 4)
    s = ground_state(t).s_n
    beta = 700.0 / s * math.sqrt(10) * 1.5  # |b H| well beyond 700
    lz = log_partition(t, ModelParams(10, 2, beta, 0.0)).log_z
    assert math.isfinite(lz)
    assert lz == pytest.approx(naive_log_z(t.values, 10, 2, beta, 0.0), rel=1e-12)


def test_capacity_error():
    with pytest.raises(CapacityError):
        log_partition(CouplingTensor(25, 2, np.zeros(625)), ModelParams(25, 2, 1.0))
    with pytest.raises(CapacityError):
        ground_state(CouplingTensor(4, 2, np.zeros(16)), limit=3)
    with pytest.raises(ValidationError):
        log_partition(TWO, ModelParams(3, 2, 1.0))


def test_gibbs_beta_zero_independent_tilted_spins():
    t = gaussian_tensor(4, 2, 8)
    h = 0.4
    params = ModelParams(4, 2, 0.0, h)
    for i in range(4):
        assert gibbs_expectation(t, params, lambda s: s.spins()[i]) == pytest.approx(math.tanh(h), abs=1e-12)
    params0 = ModelParams(4, 2, 0.0, 0.0)
    for i in range(4):
        for j in range(4):
            val = gibbs_expectation(t, params0, lambda s: s.spins()[i] * s.spins()[j])
            assert val == pytest.approx(1.0 if i == j else 0.0, abs=1e-12)


def test_gibbs_matches_naive_weighted_sum():
    t = gaussian_tensor(3, 2, 12)
    params = ModelParams(3, 2, 1.7, -0.2)
    obs = lambda s: s.spins()[0] - 2.0 * s.spins()[1] * s.spins()[2] + 0.3
    f_vals = [obs(SpinConfiguration(3, w)) for w in range(8)]
    ref = naive_gibbs(t.values, 3, 2, 1.7, -0.2, f_vals)
    assert gibbs_expectation(t, params, obs) == pytest.approx(ref, rel=1e-12)


def test_gibbs_pspin_and_moments():
    t = gaussian_tensor(4, 3, 2)
    params = ModelParams(4, 3, 1.1, 0.2)
    spins = all_spins(4)
    x = spins[:, 0] * spins[:, 2]
    m = spin_product_moments(t, params, (0, 2))
    assert m[0] == pytest.approx(naive_gibbs(t.values, 4, 3, 1.1, 0.2, x), rel=1e-12)
    assert m[1] == pytest.approx(1.0, abs=1e-14)
    assert gibbs_expectation(t, params, lambda s: s.spins()[0] * s.spins()[2]) == pytest.approx(m[0], rel=1e-12)


def test_ground_state_small_cases():
    g1 = ground_state(CouplingTensor(1, 2, [-0.4]))
    assert g1.s_n == -0.4 and g1.degeneracy_hint == 2
    g2 = ground_state(TWO)
    assert g2.s_n == pytest.approx(1.4, abs=1e-15)
    assert g2.s_n == pytest.approx(0.5 - 0.3 + abs(1.0 + 0.2), abs=1e-15)
    assert energy(TWO, g2.argmax) == pytest.approx(g2.s_n)
    assert g2.degeneracy_hint == 2


@pytest.mark.parametrize("n,p", [(10, 2), (7, 3)])
def test_ground_state_matches_full_scan(n, p):
    t = gaussian_tensor(n, p, 77)
    gs = ground_state(t)
    e = fast_energies(t.values, n, p)
    assert gs.s_n == pytest.approx(e.max(), rel=1e-12)
    assert energy(t, gs.argmax) == pytest.approx(e.max(), rel=1e-12)
    assert np.all(e <= gs.s_n + 1e-10)


def test_rademacher_ties_counted():
    t = sample_couplings(EnvironmentSpec("rademacher"), 6, 2, 5)
    gs = ground_state(t)
    e = fast_energies(t.values, 6, 2)
    assert gs.degeneracy_hint == int(np.sum(np.abs(e - e.max()) <= 1e-12))
    assert gs.degeneracy_hint >= 2


def test_batch_paths_agree_with_single_calls():
    rng = np.random.default_rng(3)
    for n, p in [(6, 2), (4, 3)]:
        vals = rng.standard_normal((4, n**p))
        params = ModelParams(n, p, 0.9, 0.1)
        lz = batch_log_partition(vals, params)
        gs = batch_ground_state(vals, n, p)
        for r in range(4):
            t = CouplingTensor(n, p, vals[r])
            assert lz[r] == log_partition(t, params).log_z
            assert gs[r] == pytest.approx(ground_state(t).s_n, rel=1e-13)


def test_interpolation_reductions():
    g = gaussian_tensor(5, 2, 1)
    xi = sample_couplings(EnvironmentSpec("rademacher"), 5, 2, 2)
    assert interpolated_log_partition(g, xi, 0.0, 0.0).log_z_tx == pytest.approx(0.0, abs=1e-12)
    for t in (0.25, 1.0, 2.0):
        pt = interpolated_log_partition(g, xi, t, 0.0, h=0.3)
        assert pt.log_z_tx == pytest.approx(log_partition(g, ModelParams(5, 2, math.sqrt(t), 0.3)).log_z, abs=1e-12)
        pt = interpolated_log_partition(g, xi, 0.0, t, h=0.3)
        assert pt.log_z_tx == pytest.approx(log_partition(xi, ModelParams(5, 2, math.sqrt(t), 0.3)).log_z, abs=1e-12)


def test_interpolation_against_direct_two_hamiltonians():
    g = gaussian_tensor(4, 2, 10)
    xi = sample_couplings(EnvironmentSpec("uniform_centered"), 4, 2, 11)
    t, x, h = 0.6, 1.3, -0.2
    eg, ex = fast_energies(g.values, 4, 2), fast_energies(xi.values, 4, 2)
    mag = all_spins(4).sum(axis=1)
    lw = (math.sqrt(t) * eg + math.sqrt(x) * ex) / 2.0 + h * mag
    ref = float(np.log(np.mean(np.exp(lw))))
    assert interpolated_log_partition(g, xi, t, x, h=h).log_z_tx == pytest.approx(ref, rel=1e-12)


def test_interpolation_errors():
    g = gaussian_tensor(4, 2, 10)
    with pytest.raises(ValidationError):
        interpolated_log_partition(g, gaussian_tensor(3, 2, 1), 1.0, 1.0)
    with pytest.raises(ValidationError):
        interpolated_log_partition(g, g, -1.0, 1.0)


@pytest.mark.parametrize("n,p", [(8, 2), (5, 3)])
def test_pathwise_sandwich(n, p):
    for seed in range(20):
        t = gaussian_tensor(n, p, seed)
        s = ground_state(t).s_n
        for beta in (0.5, 1.0, 4.0):
            b = beta / math.sqrt(n ** (p - 1))
            lz = log_partition(t, ModelParams(n, p, beta, 0.0)).log_z
            assert b * s >= lz
            assert lz >= -n * math.log(2.0) + b * s


def test_convex_in_beta():
    t = gaussian_tensor(7, 2, 21)
    f = lambda beta: log_partition(t, ModelParams(7, 2, beta, 0.2)).log_z
    step = 0.05
    for beta in (-1.0, 0.0, 0.7, 2.0):
        assert f(beta + step) - 2 * f(beta) + f(beta - step) > 0


@pytest.mark.parametrize("p", [2, 3])
def test_negative_beta_equals_negated_environment(p):
    t = gaussian_tensor(5, p, 31)
    for beta in (0.4, 1.5):
        lhs = log_partition(t, ModelParams(5, p, -beta, 0.1)).log_z
        rhs = log_partition(t.scaled(-1.0), ModelParams(5, p, beta, 0.1)).log_z
        assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-13)
