"""Disorder-averaged estimators over independent coupling replicas.

Replica ``r`` of stream ``k`` uses the coupling seed
``derive_seed(master_seed, k, r)``, so every estimate is a pure function of
its inputs and the master seed.  Work is split into chunks that may run in
a process pool; chunk results are concatenated in replica order before
any reduction, so the number of jobs never changes a value.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import exact_engine
from .disorder import EnvironmentSpec, analytic_moments, derive_seed, draw, environment, make_rng
from .errors import NumericalError, ValidationError
from .spin_model import CouplingTensor, ModelParams

# stream tags for derive_seed
STREAM_XI = 0
STREAM_B = 1
STREAM_G = 2
STREAM_BOOTSTRAP = 99

QUAD_TOL = 1e-10
TAIL_MASS = 1e-12


def default_jobs() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------- replica statistics


@dataclass(frozen=True)
class ReplicaStats:
    """Count, mean and sum of squared deviations; merges associatively."""

    count: int
    mean: float
    m2: float

    @classmethod
    def from_values(cls, values) -> "ReplicaStats":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            return cls(0, 0.0, 0.0)
        if np.all(v == v[0]):
            return cls(int(v.size), float(v[0]), 0.0)
        mean = float(v.mean())
        return cls(int(v.size), mean, float(((v - mean) ** 2).sum()))

    def merge(self, other: "ReplicaStats") -> "ReplicaStats":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return ReplicaStats(n, mean, m2)

    @property
    def std(self) -> float:
        return math.sqrt(self.m2 / (self.count - 1)) if self.count > 1 else 0.0

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.count) if self.count > 1 else 0.0


def bootstrap_stderr(values, resamples: int, seed: int) -> float:
    """Standard error of the mean from ``resamples`` bootstrap resamples."""
    v = np.asarray(values, dtype=np.float64)
    idx = make_rng(seed).integers(0, v.size, size=(resamples, v.size))
    return float(v[idx].mean(axis=1).std(ddof=1))


def replica_seeds(master_seed: int, stream: int, replicas: int) -> list[int]:
    return [derive_seed(master_seed, stream, r) for r in range(replicas)]


def _draw_stack(env: EnvironmentSpec, size: int, seeds) -> np.ndarray:
    out = np.empty((len(seeds), size))
    for row, seed in enumerate(seeds):
        out[row] = draw(env, size, make_rng(seed))
    return out


def _log_z_chunk(env_json, n, p, beta, h, limit, seeds):
    env = EnvironmentSpec.from_json(env_json)
    values = _draw_stack(env, n**p, seeds)
    return exact_engine.batch_log_partition(values, ModelParams(n, p, beta, h), limit)


def _ground_state_chunk(env_json, n, p, limit, seeds):
    env = EnvironmentSpec.from_json(env_json)
    values = _draw_stack(env, n**p, seeds)
    return exact_engine.batch_ground_state(values, n, p, limit)


def _path_chunk(env_json, n, p, h, grid, limit, g_seeds, xi_seeds):
    env = EnvironmentSpec.from_json(env_json)
    gauss = EnvironmentSpec("gaussian")
    g = _draw_stack(gauss, n**p, g_seeds)
    xi = _draw_stack(env, n**p, xi_seeds)
    t0 = grid[-1]
    params = ModelParams(n, p, 1.0, h)
    out = np.empty((len(g_seeds), len(grid)))
    for col, s in enumerate(grid):
        mixed = math.sqrt(s) * g + math.sqrt(max(t0 - s, 0.0)) * xi
        out[:, col] = exact_engine.batch_log_partition(mixed, params, limit)
    return out


def _chunks(seq, jobs):
    size = max(1, math.ceil(len(seq) / (4 * jobs)))
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def _map_replicas(fn: Callable, fixed: tuple, seed_lists: list, jobs: int | None) -> np.ndarray:
    """Evaluate fn(*fixed, *seed_chunks) over replica chunks, results in replica order."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    count = len(seed_lists[0])
    bounds = _chunks(list(range(count)), jobs)
    tasks = [tuple(s[b[0]:b[-1] + 1] for s in seed_lists) for b in bounds]
    if jobs == 1 or len(tasks) == 1:
        parts = [fn(*fixed, *t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(fn, *fixed, *t) for t in tasks]
            parts = [f.result() for f in futures]
    return np.concatenate(parts, axis=0)


def log_z_replicas(env, params: ModelParams, replicas: int, master_seed: int, stream: int = STREAM_XI,
                   jobs: int | None = 1, limit: int | None = None):
    """Per-replica (seeds, log Z) for ``replicas`` independent coupling tensors."""
    env = environment(env)
    exact_engine.check_capacity(params.n, params.p, limit)
    seeds = replica_seeds(master_seed, stream, replicas)
    if params.beta == 0.0:
        # Z does not see the couplings; n log cosh h = n (logaddexp(h, -h) - log 2)
        value = params.n * (float(np.logaddexp(params.h, -params.h)) - math.log(2.0))
        return seeds, np.full(replicas, value)
    fixed = (env.to_json(), params.n, params.p, params.beta, params.h, limit)
    return seeds, _map_replicas(_log_z_chunk, fixed, [seeds], jobs)


# ---------------------------------------------------------------- free energy


@dataclass(frozen=True)
class FreeEnergyEstimate:
    alpha_hat: float
    stderr: float
    replicas: int
    env_id: str
    params: ModelParams
    master_seed: int
    stream: int = STREAM_XI
    per_replica: tuple | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        out = asdict(self)
        out["per_replica"] = None if self.per_replica is None else [list(x) for x in self.per_replica]
        return out


def estimate_free_energy(env, params: ModelParams, replicas: int, master_seed: int, *, stream: int = STREAM_XI,
                         jobs: int | None = 1, keep_per_replica: bool = False, bootstrap: int = 0,
                         limit: int | None = None) -> FreeEnergyEstimate:
    """Mean and stderr of (1/n) log Z_n over independent replicas.

    ``bootstrap > 0`` replaces the plain sample stderr by a bootstrap one
    with that many resamples (seeded from the master seed).
    """
    if replicas < 2:
        raise ValidationError("replicas must be >= 2")
    env = environment(env)
    seeds, lz = log_z_replicas(env, params, replicas, master_seed, stream, jobs, limit)
    per = lz / params.n
    stats = ReplicaStats.from_values(per)
    stderr = stats.stderr
    if bootstrap > 0 and stats.m2 > 0:
        stderr = bootstrap_stderr(per, bootstrap, derive_seed(master_seed, STREAM_BOOTSTRAP, stream))
    return FreeEnergyEstimate(
        alpha_hat=stats.mean,
        stderr=stderr,
        replicas=replicas,
        env_id=env.env_id,
        params=params,
        master_seed=int(master_seed),
        stream=stream,
        per_replica=tuple(zip(seeds, per.tolist())) if keep_per_replica else None,
    )


# ---------------------------------------------------------------- fluctuations


@dataclass(frozen=True)
class FluctuationEstimate:
    third_abs_central: float
    stderr: float
    d: int
    beta_scaled: float
    replicas: int
    env_id: str
    params: ModelParams
    master_seed: int

    def to_json(self) -> dict:
        return asdict(self)


def estimate_fluctuation_moment(env, params: ModelParams, replicas: int, master_seed: int, *,
                                jobs: int | None = 1, limit: int | None = None) -> FluctuationEstimate:
    """Plug-in E|log Z - E log Z|^3, centred on the sample mean; log Z is not divided by n."""
    if replicas < 100:
        raise ValidationError("fluctuation moments need replicas >= 100")
    env = environment(env)
    _, lz = log_z_replicas(env, params, replicas, master_seed, STREAM_XI, jobs, limit)
    dev = np.abs(lz - ReplicaStats.from_values(lz).mean) ** 3
    stats = ReplicaStats.from_values(dev)
    return FluctuationEstimate(
        third_abs_central=stats.mean,
        stderr=stats.stderr,
        d=params.n**params.p,
        beta_scaled=params.scaled_beta,
        replicas=replicas,
        env_id=env.env_id,
        params=params,
        master_seed=int(master_seed),
    )


# ---------------------------------------------------------------- ground states


@dataclass(frozen=True)
class GroundStateDensityEstimate:
    density_hat: float
    stderr: float
    replicas: int
    n: int
    p: int
    env_id: str
    master_seed: int
    stream: int = STREAM_XI

    def to_json(self) -> dict:
        return asdict(self)


def ground_state_density_replicas(env, n: int, replicas: int, master_seed: int, *, p: int = 2,
                                  stream: int = STREAM_XI, jobs: int | None = 1, limit: int | None = None):
    env = environment(env)
    exact_engine.check_capacity(n, p, limit)
    seeds = replica_seeds(master_seed, stream, replicas)
    s_n = _map_replicas(_ground_state_chunk, (env.to_json(), n, p, limit), [seeds], jobs)
    return seeds, s_n / float(n) ** ((p + 1) / 2)


def estimate_ground_state_density(env, n: int, replicas: int, master_seed: int, *, p: int = 2,
                                  stream: int = STREAM_XI, jobs: int | None = 1,
                                  limit: int | None = None) -> GroundStateDensityEstimate:
    """Mean and stderr of n^{-(p+1)/2} S_n (n^{-3/2} S_n for the SK model)."""
    if replicas < 2:
        raise ValidationError("replicas must be >= 2")
    env = environment(env)
    _, dens = ground_state_density_replicas(env, n, replicas, master_seed, p=p, stream=stream, jobs=jobs,
                                            limit=limit)
    stats = ReplicaStats.from_values(dens)
    return GroundStateDensityEstimate(stats.mean, stats.stderr, replicas, n, p, env.env_id, int(master_seed), stream)


# ---------------------------------------------------------------- interpolation path


@dataclass(frozen=True)
class PathSample:
    s: float
    alpha_s: float
    alpha_stderr: float
    deriv_fd: float | None = None
    deriv_stderr: float | None = None


@dataclass(frozen=True)
class InterpolationScan:
    t0: float
    samples: tuple[PathSample, ...]
    d: int
    n: int
    p: int
    h: float
    replicas: int
    env_id: str
    master_seed: int
    fd_bias_allowance: float

    @property
    def interior(self) -> tuple[PathSample, ...]:
        return self.samples[1:-1]

    def path_bound(self, abs_third: float) -> float:
        """9 d E|xi|^3 sqrt(t0): the envelope on |d/ds alpha(s, t0 - s)|."""
        return 9.0 * self.d * abs_third * math.sqrt(self.t0)

    def to_json(self) -> dict:
        return asdict(self)


def scan_interpolation_path(env, n: int, t0: float, *, p: int = 2, h: float = 0.0, grid_points: int = 21,
                            replicas: int = 1000, master_seed: int = 0, jobs: int | None = 1,
                            limit: int | None = None) -> InterpolationScan:
    """Disorder average of log Z(s, t0 - s) along a uniform s grid on [0, t0].

    Each replica draws an independent Gaussian tensor g and an ``env``
    tensor xi and reuses them at every grid point, so the centred
    differences are taken replica by replica.  ``alpha_s`` is not divided
    by n.  ``fd_bias_allowance`` bounds the centred-difference error by
    step^2/6 times the largest measured third difference quotient.
    """
    if grid_points < 3:
        raise ValidationError("grid_points must be >= 3")
    if not t0 > 0:
        raise ValidationError("t0 must be > 0")
    env = environment(env)
    exact_engine.check_capacity(n, p, limit)
    grid = np.linspace(0.0, t0, grid_points)
    grid[-1] = t0
    g_seeds = replica_seeds(master_seed, STREAM_G, replicas)
    xi_seeds = replica_seeds(master_seed, STREAM_XI, replicas)
    vals = _map_replicas(_path_chunk, (env.to_json(), n, p, h, tuple(grid.tolist()), limit),
                         [g_seeds, xi_seeds], jobs)
    step = grid[1] - grid[0]
    samples = []
    for i, s in enumerate(grid):
        st = ReplicaStats.from_values(vals[:, i])
        if 0 < i < grid_points - 1:
            dst = ReplicaStats.from_values((vals[:, i + 1] - vals[:, i - 1]) / (2.0 * step))
            samples.append(PathSample(float(s), st.mean, st.stderr, dst.mean, dst.stderr))
        else:
            samples.append(PathSample(float(s), st.mean, st.stderr))
    means = np.array([x.alpha_s for x in samples])
    if grid_points >= 4:
        third = np.abs(np.diff(means, 3)).max() / step**3
    else:
        third = 0.0
    return InterpolationScan(
        t0=float(t0),
        samples=tuple(samples),
        d=n**p,
        n=n,
        p=p,
        h=float(h),
        replicas=replicas,
        env_id=env.env_id,
        master_seed=int(master_seed),
        fd_bias_allowance=float(step**2 / 6.0 * third),
    )


# ---------------------------------------------------------------- integration by parts


@dataclass(frozen=True)
class TestFunction:
    """F with its derivative and sup-norm bounds on F'' (and F''' if known)."""

    function_id: str
    f: Callable[[float], float]
    df: Callable[[float], float]
    sup_d2: float
    sup_d3: float | None = None
    d2: Callable[[float], float] | None = None

    __test__ = False  # not a pytest class


def _rational_d2(x):
    return 2.0 * x * (3.0 - x * x) / (1.0 + x * x) ** 3


# F = x^3/(1+x^2) = x - x/(1+x^2); |F''| peaks where x^4 - 6x^2 + 1 = 0, i.e. x = sqrt2 - 1,
# and |F'''| peaks at x = 0 with value 6.
_RATIONAL_SUP_D2 = abs(_rational_d2(math.sqrt(2.0) - 1.0))

SIN = TestFunction("sin", math.sin, math.cos, 1.0, 1.0, lambda x: -math.sin(x))
COS = TestFunction("cos", math.cos, lambda x: -math.sin(x), 1.0, 1.0, lambda x: -math.cos(x))
IDENTITY = TestFunction("identity", lambda x: x, lambda x: 1.0, 0.0, 0.0, lambda x: 0.0)
RATIONAL = TestFunction(
    "cubic_over_quadratic",
    lambda x: x**3 / (1.0 + x * x),
    lambda x: (x**4 + 3.0 * x * x) / (1.0 + x * x) ** 2,
    _RATIONAL_SUP_D2,
    6.0,
    _rational_d2,
)


class GibbsSpinFunction:
    """z -> <X_i> on a two-spin model where coupling ``index`` is set to z.

    X_i is the spin product of coupling ``index`` (flat, row-major) and the
    Gibbs weight is exp(beta * sum_j X_j xi_j + h M), beta being the factor
    that multiplies the couplings directly.  Derivatives in z:

        F'  = beta (<X^2> - <X>^2)
        F'' = beta^2 (<X^3> - 3 <X^2><X> + 2 <X>^3)

    and |X| <= 1 gives 0 <= F' <= beta, |F''| <= 6 beta^2.
    """

    def __init__(self, others, beta: float, h: float = 0.0, index: int = 1, n: int = 2):
        vals = np.array(others, dtype=np.float64).ravel()
        if vals.size != n * n:
            raise ValidationError(f"need {n * n} coupling values")
        self.n = n
        self.values = vals
        self.beta = float(beta)
        self.h = float(h)
        self.index = int(index)
        self.pair = divmod(self.index, n)
        # engine divides beta by sqrt(n)
        self._params = ModelParams(n, 2, self.beta * math.sqrt(n), self.h)

    def moments(self, z: float) -> np.ndarray:
        vals = self.values.copy()
        vals[self.index] = z
        return exact_engine.spin_product_moments(CouplingTensor(self.n, 2, vals), self._params, self.pair)

    def __call__(self, z: float) -> float:
        return float(self.moments(z)[0])

    def d1(self, z: float) -> float:
        m1, m2, _ = self.moments(z)
        return self.beta * (m2 - m1 * m1)

    def d2(self, z: float) -> float:
        m1, m2, m3 = self.moments(z)
        return self.beta**2 * (m3 - 3.0 * m2 * m1 + 2.0 * m1**3)

    def test_function(self) -> TestFunction:
        return TestFunction(f"gibbs_spin[beta={self.beta:g},h={self.h:g},i={self.index}]", self, self.d1,
                            6.0 * self.beta**2, None, self.d2)


def gibbs_test_function(beta: float = 1.0, h: float = 0.3, seed: int = 11) -> TestFunction:
    """Lemma-type Gibbs function on a fixed random two-spin environment."""
    others = draw(EnvironmentSpec("gaussian"), 4, make_rng(seed))
    return GibbsSpinFunction(others, beta, h).test_function()


def test_function_catalog() -> list[TestFunction]:
    return [SIN, COS, RATIONAL, gibbs_test_function()]


@dataclass(frozen=True)
class IbpReport:
    function_id: str
    defect: float
    bound3: float
    bound4: float | None
    env_id: str
    method: str

    def to_json(self) -> dict:
        return asdict(self)


def _quad_window(env: EnvironmentSpec):
    if env.family == "gaussian":
        # P(|g| > R) < TAIL_MASS, with room for polynomial growth of the integrand
        r = float(-special.ndtri(TAIL_MASS / 2.0)) + 1.5
        return -r, r, lambda x: math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if env.family == "uniform_centered":
        r = math.sqrt(3.0)
        return -r, r, lambda x: 1.0 / (2.0 * r)
    if env.family == "shifted_exponential":
        hi = -math.log(TAIL_MASS) + 12.0
        return -1.0, hi, lambda x: math.exp(-(x + 1.0))
    raise ValidationError(f"no quadrature rule for {env.family}")


def _expect(env: EnvironmentSpec, fn, breakpoints=()) -> float:
    lo, hi, dens = _quad_window(env)
    pts = [x for x in breakpoints if lo < x < hi] or None
    with warnings.catch_warnings():
        # non-convergence is reported through the error estimate below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(lambda x: fn(x) * dens(x), lo, hi, epsabs=QUAD_TOL, epsrel=QUAD_TOL,
                                  limit=400, points=pts)
    if not err <= QUAD_TOL:
        raise NumericalError(f"quadrature for {env.env_id} missed tolerance {QUAD_TOL:g}", achieved=err)
    return val


def ibp_defect(env, func: TestFunction) -> IbpReport:
    """|E xi F(xi) - E xi^2 E F'(xi)| together with its moment bounds.

    bound3 = 1.5 sup|F''| E|xi|^3 always; bound4 = sup|F'''| E xi^4 when
    E xi^3 = 0 and a bound on F''' is supplied.
    """
    env = environment(env)
    mom = analytic_moments(env)
    if env.is_discrete:
        a, q = env.support()
        e_xf = float(sum(qi * ai * func.f(ai) for ai, qi in zip(a, q)))
        e_df = float(sum(qi * func.df(ai) for ai, qi in zip(a, q)))
        second = float(q @ a**2)
        method = "exact_discrete_sum"
    else:
        e_xf = _expect(env, lambda x: x * func.f(x), (0.0,))
        e_df = _expect(env, func.df, (0.0,))
        second = mom.variance + mom.mean**2
        method = "quadrature"
    defect = abs(e_xf - second * e_df)
    bound4 = None
    if mom.symmetric_class and func.sup_d3 is not None:
        bound4 = func.sup_d3 * mom.fourth
    return IbpReport(func.function_id, defect, 1.5 * func.sup_d2 * mom.abs_third, bound4, env.env_id, method)


# ---------------------------------------------------------------- extrapolation


def extrapolate_limit(series, model: str = "inv_sqrt_n", *, with_stderr: bool = False):
    """Weighted least-squares intercept of estimate against n^{-1/2} or n^{-1/6}.

    ``series`` holds (n, estimate, stderr) triples; weights are 1/stderr^2
    when every stderr is positive, uniform otherwise.  Returns the
    intercept and the weighted residual sum of squares, plus the
    intercept's standard error (from the weights) if ``with_stderr``.
    """
    rows = [tuple(map(float, r)) for r in series]
    if len(rows) < 3:
        raise ValidationError("extrapolation needs at least 3 points")
    ns = np.array([r[0] for r in rows])
    if len(set(ns.tolist())) != len(ns):
        raise ValidationError("extrapolation needs distinct n")
    rate = {"inv_sqrt_n": 0.5, "inv_n_sixth": 1.0 / 6.0}.get(model)
    if rate is None:
        raise ValidationError(f"unknown extrapolation model {model!r}")
    y = np.array([r[1] for r in rows])
    se = np.array([r[2] for r in rows])
    w = 1.0 / se**2 if np.all(se > 0) else np.ones_like(y)
    X = np.column_stack([np.ones_like(ns), ns**-rate])
    sw = np.sqrt(w)
    coef, _, rank, _ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    if rank < 2:
        raise NumericalError("degenerate design matrix in extrapolation")
    resid = float(np.sum(w * (y - X @ coef) ** 2))
    if with_stderr:
        cov = np.linalg.inv((X * w[:, None]).T @ X)
        return float(coef[0]), resid, float(math.sqrt(cov[0, 0]))
    return float(coef[0]), resid


# ---------------------------------------------------------------- export


def write_per_replica_csv(estimate: FreeEnergyEstimate, path) -> None:
    if estimate.per_replica is None:
        raise ValidationError("estimate was computed without keep_per_replica=True")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica_index", "seed", "value"])
        for i, (seed, value) in enumerate(estimate.per_replica):
            w.writerow([i, seed, f"{value:.17g}"])


def dumps(record) -> str:
    return json.dumps(record.to_json(), sort_keys=True)
