"""Explicit universality bounds and environment-vs-environment comparisons.

Bounds against the Gaussian environment g:

    free energy      9 E|xi|^3 |beta|^3 / n^{(p-1)/2}        (SK: / sqrt n)
    generic vector   9 d E|xi|^3 |beta|^3
    symmetric class  C E xi^4 beta^4 / n   (or C E xi^4 d beta^4)
    ground state     C (1 + E|xi|^3) n^{-1/6}  (symmetric: C (1 + E xi^4) n^{-1/4})
    fluctuations     c E|xi|^3 |beta|^3 d^{3/2}

The constants C, c exist but have no known value; they are configurable.
Comparing two non-Gaussian environments uses the triangle inequality
through g, and the report lists both terms.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .disorder import EnvironmentSpec, analytic_moments, environment
from .errors import AssumptionError, ValidationError
from .estimators import STREAM_B, STREAM_XI, estimate_free_energy, estimate_ground_state_density
from .spin_model import ModelParams

VERDICT_SLACK = 5.0

CSV_FIELDS = ("env_a", "env_b", "quantity", "n", "p", "beta", "h", "replicas", "seed",
              "mean_a", "mean_b", "gap", "stderr", "bound", "constant", "ratio", "verdict")


@dataclass(frozen=True)
class BoundSpec:
    c_theorem2: float = 16.0
    c_prop2: float = 16.0
    c_lemma3: float = 16.0
    c_prop2_ground_state: float = 16.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValidationError(f"{name} must be positive, got {value}")


def theorem1_bound(env, n: int, beta: float) -> float:
    return 9.0 * analytic_moments(environment(env)).abs_third * abs(beta) ** 3 / math.sqrt(n)


def prop1_bound(env, d: int, beta: float) -> float:
    return 9.0 * d * analytic_moments(environment(env)).abs_third * abs(beta) ** 3


def pspin_bound(env, n: int, p: int, beta: float) -> float:
    if p < 2:
        raise ValidationError("p must be >= 2")
    return 9.0 * analytic_moments(environment(env)).abs_third * abs(beta) ** 3 / float(n) ** ((p - 1) / 2)


def _require_symmetric(env: EnvironmentSpec):
    mom = analytic_moments(env)
    if not mom.symmetric_class:
        raise AssumptionError(
            f"{env.env_id} is outside the symmetric class: needs E xi^3 = 0 and E xi^4 < inf (E xi^3 = {mom.third:g})"
        )
    return mom


def symmetric_bound(env, n: int | None = None, beta: float = 1.0, spec: BoundSpec = BoundSpec(), *,
                    d: int | None = None) -> float:
    """C E xi^4 beta^4 / n, or C E xi^4 d beta^4 when ``d`` is given instead of ``n``."""
    mom = _require_symmetric(environment(env))
    if (n is None) == (d is None):
        raise ValidationError("pass exactly one of n (SK form) or d (generic form)")
    if d is not None:
        return spec.c_prop2 * mom.fourth * d * beta**4
    return spec.c_prop2 * mom.fourth * beta**4 / n


def theorem2_bound(env, n: int, spec: BoundSpec = BoundSpec(), *, rate: str = "third") -> float:
    """Ground-state density gap envelope; ``rate='fourth'`` is the symmetric-class N^{-1/4} form."""
    env = environment(env)
    if rate == "third":
        return spec.c_theorem2 * (1.0 + analytic_moments(env).abs_third) * float(n) ** (-1.0 / 6.0)
    if rate == "fourth":
        mom = _require_symmetric(env)
        return spec.c_prop2_ground_state * (1.0 + mom.fourth) * float(n) ** (-0.25)
    raise ValidationError(f"unknown rate {rate!r}")


def lemma3_bound(env, d: int, beta_scaled: float, spec: BoundSpec = BoundSpec()) -> float:
    return spec.c_lemma3 * analytic_moments(environment(env)).abs_third * abs(beta_scaled) ** 3 * d**1.5


def verdict(gap: float, bound: float, stderr: float, slack: float = VERDICT_SLACK) -> str:
    if gap <= bound:
        return "within_bound"
    if gap <= bound + slack * stderr:
        return "within_bound_plus_noise"
    return "violated"


@dataclass(frozen=True)
class ComparisonReport:
    env_a: str
    env_b: str
    quantity: str
    gap_hat: float
    combined_stderr: float
    theoretical_bound: float
    verdict: str
    params: ModelParams
    mean_a: float
    mean_b: float
    stderr_a: float
    stderr_b: float
    replicas: int
    master_seed: int
    bound_terms: tuple[tuple[str, float], ...]
    constant: float | None = None

    @property
    def ratio(self) -> float:
        if self.theoretical_bound > 0:
            return self.gap_hat / self.theoretical_bound
        return 0.0 if self.gap_hat == 0 else math.inf

    def to_json(self) -> dict:
        out = asdict(self)
        out["bound_terms"] = [list(t) for t in self.bound_terms]
        out["ratio"] = self.ratio
        return out

    def csv_row(self) -> dict:
        return {
            "env_a": self.env_a,
            "env_b": self.env_b,
            "quantity": self.quantity,
            "n": self.params.n,
            "p": self.params.p,
            "beta": self.params.beta,
            "h": self.params.h,
            "replicas": self.replicas,
            "seed": self.master_seed,
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "gap": self.gap_hat,
            "stderr": self.combined_stderr,
            "bound": self.theoretical_bound,
            "constant": "" if self.constant is None else self.constant,
            "ratio": self.ratio,
            "verdict": self.verdict,
        }


def _through_gaussian(env_a: EnvironmentSpec, env_b: EnvironmentSpec, term):
    """Bound terms for env_a vs env_b, composed through g when neither is Gaussian."""
    if env_b.family == "gaussian":
        return ((f"{env_a.env_id}->gaussian", term(env_a)),)
    if env_a.family == "gaussian":
        return ((f"{env_b.env_id}->gaussian", term(env_b)),)
    return ((f"{env_a.env_id}->gaussian", term(env_a)), (f"{env_b.env_id}->gaussian", term(env_b)))


def compare_free_energy(env_a, env_b, params: ModelParams, replicas: int, master_seed: int,
                        spec: BoundSpec = BoundSpec(), *, sharper: bool = False, jobs: int | None = 1,
                        limit: int | None = None) -> ComparisonReport:
    """Measured |alpha_n(a) - alpha_n(b)| against the free-energy universality bound.

    ``sharper=True`` uses the symmetric-class rate C E xi^4 beta^4 / n
    (both environments must qualify, SK model only).
    """
    env_a, env_b = environment(env_a), environment(env_b)
    if sharper:
        if params.p != 2:
            raise ValidationError("the symmetric-class rate is stated for p=2 only")
        terms = _through_gaussian(env_a, env_b, lambda e: symmetric_bound(e, params.n, params.beta, spec))
        constant = spec.c_prop2
    else:
        terms = _through_gaussian(env_a, env_b, lambda e: pspin_bound(e, params.n, params.p, params.beta))
        constant = 9.0
    est_a = estimate_free_energy(env_a, params, replicas, master_seed, stream=STREAM_XI, jobs=jobs, limit=limit)
    est_b = estimate_free_energy(env_b, params, replicas, master_seed, stream=STREAM_B, jobs=jobs, limit=limit)
    return _report(env_a, env_b, "free_energy", params, est_a.alpha_hat, est_b.alpha_hat, est_a.stderr,
                   est_b.stderr, replicas, master_seed, terms, constant)


def compare_ground_state(env_a, env_b, n: int, replicas: int, master_seed: int, spec: BoundSpec = BoundSpec(), *,
                         rate: str = "third", jobs: int | None = 1, limit: int | None = None) -> ComparisonReport:
    """Measured n^{-3/2} |E S_n(a) - E S_n(b)| against the ground-state envelope.

    The report's params carry beta = h = 0 (no temperature is involved).
    """
    env_a, env_b = environment(env_a), environment(env_b)
    terms = _through_gaussian(env_a, env_b, lambda e: theorem2_bound(e, n, spec, rate=rate))
    constant = spec.c_theorem2 if rate == "third" else spec.c_prop2_ground_state
    est_a = estimate_ground_state_density(env_a, n, replicas, master_seed, stream=STREAM_XI, jobs=jobs, limit=limit)
    est_b = estimate_ground_state_density(env_b, n, replicas, master_seed, stream=STREAM_B, jobs=jobs, limit=limit)
    return _report(env_a, env_b, "ground_state_density", ModelParams(n, 2, 0.0, 0.0),
                   est_a.density_hat, est_b.density_hat, est_a.stderr, est_b.stderr, replicas, master_seed, terms,
                   constant)


def _report(env_a, env_b, quantity, params, mean_a, mean_b, se_a, se_b, replicas, seed, terms, constant):
    gap = abs(mean_a - mean_b)
    combined = math.sqrt(se_a**2 + se_b**2)
    bound = sum(v for _, v in terms)
    return ComparisonReport(
        env_a=env_a.env_id,
        env_b=env_b.env_id,
        quantity=quantity,
        gap_hat=gap,
        combined_stderr=combined,
        theoretical_bound=bound,
        verdict=verdict(gap, bound, combined),
        params=params,
        mean_a=mean_a,
        mean_b=mean_b,
        stderr_a=se_a,
        stderr_b=se_b,
        replicas=replicas,
        master_seed=int(seed),
        bound_terms=terms,
        constant=constant,
    )
