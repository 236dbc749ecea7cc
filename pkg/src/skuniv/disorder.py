"""Disorder environments: normalized coupling laws, sampling and moments.

Every environment has mean 0 and variance 1 and a finite third absolute
moment.  Catalog families carry closed-form moments; ``discrete_custom``
laws are given as a finite list of ``(atom, probability)`` pairs.

Seeds
-----
Per-replica streams are derived from a master seed with
:func:`derive_seed`, which feeds ``(master_seed, stream, replica)`` into
:class:`numpy.random.SeedSequence` (``entropy=master_seed``,
``spawn_key=(stream, replica)``) and takes the first 64-bit word of its
state.  The coupling values for a given 64-bit seed are drawn from
``numpy.random.Generator(PCG64(seed))``; Gaussian draws use numpy's
ziggurat ``standard_normal``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SizeError, ValidationError

FAMILIES = ("gaussian", "rademacher", "uniform_centered", "shifted_exponential", "discrete_custom")
CATALOG = ("gaussian", "rademacher", "uniform_centered", "shifted_exponential")

_NORM_TOL = 1e-12
_MAX_INDEX = 2**62

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class MomentReport:
    mean: float
    variance: float
    abs_third: float
    third: float
    fourth: float
    symmetric_class: bool

    def as_dict(self):
        return {
            "mean": self.mean,
            "variance": self.variance,
            "abs_third": self.abs_third,
            "third": self.third,
            "fourth": self.fourth,
            "symmetric_class": self.symmetric_class,
        }


@dataclass(frozen=True)
class EnvironmentSpec:
    """A normalized disorder law.

    ``atoms`` is only used by ``discrete_custom`` and holds
    ``(value, probability)`` pairs.
    """

    family: str
    atoms: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown environment family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "discrete_custom":
            atoms = tuple((float(a), float(q)) for a, q in self.atoms)
            object.__setattr__(self, "atoms", atoms)
            _validate_atoms(atoms)
        elif self.atoms:
            raise ValidationError(f"family {self.family!r} takes no parameters")

    @property
    def env_id(self) -> str:
        if self.family != "discrete_custom":
            return self.family
        body = ";".join(f"{a:.17g}:{q:.17g}" for a, q in self.atoms)
        return f"discrete_custom[{body}]"

    @property
    def is_discrete(self) -> bool:
        return self.family in ("rademacher", "discrete_custom")

    def support(self):
        """Atoms and probabilities of a discrete law as two arrays."""
        if self.family == "rademacher":
            return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
        if self.family == "discrete_custom":
            a = np.array([x for x, _ in self.atoms])
            q = np.array([y for _, y in self.atoms])
            return a, q
        raise ValidationError(f"{self.family} is not a discrete law")

    def to_json(self) -> dict:
        params = {}
        if self.family == "discrete_custom":
            params = {"atoms": [[a, q] for a, q in self.atoms]}
        return {"family": self.family, "params": params}

    @classmethod
    def from_json(cls, obj) -> "EnvironmentSpec":
        """Parse ``{"family": ..., "params": {...}}`` (dict or JSON text).

        ``discrete_custom`` expects ``params = {"atoms": [[value, prob], ...]}``.
        """
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or "family" not in obj:
            raise ValidationError("environment JSON must be an object with a 'family' key")
        extra = set(obj) - {"family", "params"}
        if extra:
            raise ValidationError(f"unknown environment keys: {sorted(extra)}")
        params = obj.get("params") or {}
        family = obj["family"]
        if family == "discrete_custom":
            if set(params) != {"atoms"}:
                raise ValidationError("discrete_custom params must be exactly {'atoms': [[value, prob], ...]}")
            return cls(family, tuple(tuple(pair) for pair in params["atoms"]))
        if params:
            raise ValidationError(f"family {family!r} takes no parameters")
        return cls(family)


def _validate_atoms(atoms):
    if not atoms:
        raise ValidationError("discrete_custom needs at least one atom")
    if any(len(pair) != 2 for pair in atoms):
        raise ValidationError("discrete_custom atoms must be (value, probability) pairs")
    a = np.array([x for x, _ in atoms])
    q = np.array([y for _, y in atoms])
    if not np.all(np.isfinite(a)):
        raise ValidationError("discrete_custom atoms must be finite")
    if np.any(q <= 0):
        raise ValidationError("discrete_custom probabilities must be positive")
    if abs(q.sum() - 1.0) > _NORM_TOL:
        raise ValidationError(f"discrete_custom probabilities sum to {q.sum():.17g}, not 1")
    mean = float(q @ a)
    if abs(mean) > _NORM_TOL:
        raise ValidationError(f"normalization E xi = 0 violated: mean is {mean:.3g}")
    var = float(q @ (a - mean) ** 2)
    if abs(var - 1.0) > _NORM_TOL:
        raise ValidationError(f"normalization E xi^2 = 1 violated: variance is {var:.17g}")


def environment(name_or_json) -> EnvironmentSpec:
    """Build an environment from a catalog name, a JSON string or a dict."""
    if isinstance(name_or_json, EnvironmentSpec):
        return name_or_json
    if isinstance(name_or_json, dict):
        return EnvironmentSpec.from_json(name_or_json)
    text = str(name_or_json).strip()
    if text.startswith("{"):
        return EnvironmentSpec.from_json(text)
    return EnvironmentSpec(text)


def analytic_moments(env: EnvironmentSpec) -> MomentReport:
    """Closed-form moments (exact atom sums for discrete laws)."""
    fam = env.family
    if fam == "gaussian":
        return MomentReport(0.0, 1.0, 2.0 * math.sqrt(2.0 / math.pi), 0.0, 3.0, True)
    if fam == "rademacher":
        return MomentReport(0.0, 1.0, 1.0, 0.0, 1.0, True)
    if fam == "uniform_centered":
        # support [-sqrt3, sqrt3]
        return MomentReport(0.0, 1.0, 3.0 * SQRT3 / 4.0, 0.0, 9.0 / 5.0, True)
    if fam == "shifted_exponential":
        # Exp(1) - 1; E|X-1|^3 = 12/e - 2
        return MomentReport(0.0, 1.0, 12.0 / math.e - 2.0, 2.0, 9.0, False)
    a, q = env.support()
    mean = float(q @ a)
    third = float(q @ a**3)
    fourth = float(q @ a**4)
    return MomentReport(
        mean=mean,
        variance=float(q @ (a - mean) ** 2),
        abs_third=float(q @ np.abs(a) ** 3),
        third=third,
        fourth=fourth,
        symmetric_class=abs(third) <= _NORM_TOL and math.isfinite(fourth),
    )


def draw(env: EnvironmentSpec, size, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` i.i.d. values from ``env`` using ``rng``."""
    fam = env.family
    if fam == "gaussian":
        return rng.standard_normal(size)
    if fam == "rademacher":
        return 2.0 * rng.integers(0, 2, size=size).astype(np.float64) - 1.0
    if fam == "uniform_centered":
        return rng.uniform(-SQRT3, SQRT3, size)
    if fam == "shifted_exponential":
        return rng.standard_exponential(size) - 1.0
    a, q = env.support()
    return a[rng.choice(len(a), size=size, p=q)]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) % 2**64))


def derive_seed(master_seed: int, stream: int, replica: int) -> int:
    """64-bit seed for replica ``replica`` of stream ``stream``."""
    ss = np.random.SeedSequence(entropy=int(master_seed) % 2**64, spawn_key=(int(stream), int(replica)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_couplings(env: EnvironmentSpec, n: int, p: int, seed: int):
    """Draw an ``n**p`` coupling tensor; a pure function of ``(env, n, p, seed)``."""
    from .spin_model import CouplingTensor

    if n < 1:
        raise ValidationError("n must be >= 1")
    if p < 2:
        raise ValidationError("p must be >= 2")
    if n**p > _MAX_INDEX:
        raise SizeError(f"n**p = {n}**{p} overflows the index range")
    values = draw(env, n**p, make_rng(seed))
    return CouplingTensor(n=n, p=p, values=values, env=env, seed=int(seed))


def empirical_moments(env: EnvironmentSpec, count: int, seed: int) -> MomentReport:
    """Sample moments of ``count`` draws (cross-check for :func:`analytic_moments`)."""
    if count < 2:
        raise ValidationError("count must be >= 2")
    x = draw(env, count, make_rng(seed))
    mean = float(x.mean())
    third = float(np.mean(x**3))
    fourth = float(np.mean(x**4))
    return MomentReport(
        mean=mean,
        variance=float(x.var(ddof=1)),
        abs_third=float(np.mean(np.abs(x) ** 3)),
        third=third,
        fourth=fourth,
        symmetric_class=analytic_moments(env).symmetric_class,
    )


def empirical_moment_stderrs(env: EnvironmentSpec, count: int, seed: int) -> dict:
    """Plug-in standard errors for the fields of :func:`empirical_moments`."""
    x = draw(env, count, make_rng(seed))
    root = math.sqrt(count)
    return {
        "mean": float(x.std(ddof=1)) / root,
        "variance": float(((x - x.mean()) ** 2).std(ddof=1)) / root,
        "abs_third": float((np.abs(x) ** 3).std(ddof=1)) / root,
        "third": float((x**3).std(ddof=1)) / root,
        "fourth": float((x**4).std(ddof=1)) / root,
    }
