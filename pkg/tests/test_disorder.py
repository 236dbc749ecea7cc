import json
import math

import numpy as np
import pytest
from scipy import integrate

from conftest import ALL_ENVS, SKEWED_TWO_POINT, THREE_POINT
from skuniv.disorder import (
    CATALOG,
    EnvironmentSpec,
    analytic_moments,
    derive_seed,
    empirical_moment_stderrs,
    empirical_moments,
    environment,
    sample_couplings,
)
from skuniv.errors import SizeError, ValidationError


def test_rademacher_moments():
    m = analytic_moments(EnvironmentSpec("rademacher"))
    assert (m.mean, m.variance, m.abs_third, m.third, m.fourth) == (0.0, 1.0, 1.0, 0.0, 1.0)


def test_gaussian_moments():
    m = analytic_moments(EnvironmentSpec("gaussian"))
    assert m.abs_third == pytest.approx(2 * math.sqrt(2 / math.pi), abs=1e-15)
    assert m.abs_third == pytest.approx(1.59577, abs=1e-5)
    assert m.third == 0.0
    assert m.fourth == 3.0


def test_uniform_moments():
    m = analytic_moments(EnvironmentSpec("uniform_centered"))
    assert m.abs_third == pytest.approx(3 * math.sqrt(3) / 4, abs=1e-15)
    assert m.fourth == pytest.approx(9 / 5, abs=1e-15)


def test_shifted_exponential_against_quadrature():
    dens = lambda x: math.exp(-(x + 1.0))
    quad = lambda f: integrate.quad(lambda x: f(x) * dens(x), -1.0, np.inf, epsabs=1e-13, limit=200)[0]
    m = analytic_moments(EnvironmentSpec("shifted_exponential"))
    assert m.mean == pytest.approx(quad(lambda x: x), abs=1e-10)
    assert m.variance == pytest.approx(quad(lambda x: x * x), abs=1e-10)
    assert m.third == pytest.approx(quad(lambda x: x**3), abs=1e-9)
    assert m.abs_third == pytest.approx(quad(lambda x: abs(x) ** 3), abs=1e-9)
    assert m.fourth == pytest.approx(quad(lambda x: x**4), abs=1e-9)
    assert m.abs_third == pytest.approx(2.4146, abs=1e-4)
    assert m.third == 2.0 and m.fourth == 9.0


def test_moment_report_invariants(any_env):
    m = analytic_moments(any_env)
    assert abs(m.mean) <= 1e-12
    assert abs(m.variance - 1.0) <= 1e-12
    assert m.abs_third >= abs(m.third)
    assert m.fourth >= m.variance**2
    assert m.abs_third >= m.variance**1.5 - 1e-12


def test_symmetric_class_flags():
    assert analytic_moments(EnvironmentSpec("rademacher")).symmetric_class
    assert analytic_moments(EnvironmentSpec("gaussian")).symmetric_class
    assert not analytic_moments(EnvironmentSpec("shifted_exponential")).symmetric_class
    assert analytic_moments(THREE_POINT).symmetric_class
    assert not analytic_moments(SKEWED_TWO_POINT).symmetric_class


@pytest.mark.parametrize(
    "atoms, message",
    [
        (((1.0, 0.5), (-1.0, 0.4)), "sum"),
        (((2.0, 0.5), (-2.0, 0.5)), "variance"),
        (((1.0, 0.5), (0.0, 0.5)), "mean"),
        (((1.0, -0.5), (-1.0, 1.5)), "positive"),
    ],
)
def test_invalid_discrete_law_names_assumption(atoms, message):
    with pytest.raises(ValidationError, match=message):
        EnvironmentSpec("discrete_custom", atoms)


def test_unknown_family_and_params():
    with pytest.raises(ValidationError):
        EnvironmentSpec("cauchy")
    with pytest.raises(ValidationError):
        EnvironmentSpec("gaussian", ((0.0, 1.0),))
    with pytest.raises(ValidationError):
        EnvironmentSpec.from_json({"family": "gaussian", "params": {"sigma": 2}})
    with pytest.raises(ValidationError):
        EnvironmentSpec.from_json({"family": "gaussian", "extra": 1})


@pytest.mark.parametrize("env", ALL_ENVS, ids=lambda e: e.family)
def test_json_round_trip(env):
    text = json.dumps(env.to_json())
    assert EnvironmentSpec.from_json(text) == env
    assert environment(text) == env


def test_discrete_custom_json_format():
    env = environment('{"family": "discrete_custom", "params": {"atoms": [[2.0, 0.2], [-0.5, 0.8]]}}')
    assert env == SKEWED_TWO_POINT


def test_rademacher_support():
    t = sample_couplings(EnvironmentSpec("rademacher"), 2, 2, 1234)
    assert t.values.shape == (4,)
    assert set(t.values.tolist()) <= {-1.0, 1.0}


@pytest.mark.parametrize("env", ALL_ENVS, ids=lambda e: e.family)
def test_sampling_deterministic(env):
    a = sample_couplings(env, 5, 2, 42)
    b = sample_couplings(env, 5, 2, 42)
    c = sample_couplings(env, 5, 2, 43)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values) or env.family == "rademacher"
    assert a.seed == 42 and a.env == env


def test_gaussian_sample_mean_clt_scale():
    t = sample_couplings(EnvironmentSpec("gaussian"), 8, 2, 7)
    assert abs(t.values.mean()) <= 4 / math.sqrt(64)


def test_pspin_tensor_shape():
    t = sample_couplings(EnvironmentSpec("gaussian"), 3, 3, 1)
    assert t.values.size == 27 and t.tensor().shape == (3, 3, 3)


def test_size_overflow():
    with pytest.raises(SizeError):
        sample_couplings(EnvironmentSpec("gaussian"), 2**20, 4, 0)
    with pytest.raises(ValidationError):
        sample_couplings(EnvironmentSpec("gaussian"), 0, 2, 0)


def test_derive_seed_streams_distinct():
    seeds = {derive_seed(7, s, r) for s in range(3) for r in range(500)}
    assert len(seeds) == 1500
    assert derive_seed(7, 0, 3) == derive_seed(7, 0, 3)
    assert all(0 <= s < 2**64 for s in seeds)


def test_empirical_examples():
    assert abs(empirical_moments(EnvironmentSpec("rademacher"), 10**6, 1).abs_third - 1) <= 0.01
    assert abs(empirical_moments(EnvironmentSpec("gaussian"), 10**6, 2).fourth - 3) <= 0.1
    assert abs(empirical_moments(EnvironmentSpec("uniform_centered"), 10**6, 3).variance - 1) <= 0.01


@pytest.mark.parametrize("env", ALL_ENVS, ids=lambda e: e.family)
def test_empirical_matches_analytic_within_five_stderr(env):
    count, seed = 10**6, 99
    emp = empirical_moments(env, count, seed).as_dict()
    ana = analytic_moments(env).as_dict()
    se = empirical_moment_stderrs(env, count, seed)
    for key, err in se.items():
        assert abs(emp[key] - ana[key]) <= 5 * err + 1e-12, key


def test_empirical_needs_two_draws():
    with pytest.raises(ValidationError):
        empirical_moments(EnvironmentSpec("gaussian"), 1, 0)
