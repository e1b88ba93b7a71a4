"""Seeded simulation of panel datasets with observed and unobserved confounding.

Every random object has its own counter-based stream (Philox keyed by a
``SeedSequence`` spawn key), so adding a new random ingredient never shifts
the draws of existing ones:

==============  ===  ==========================================================
stream          key  contents
==============  ===  ==========================================================
coefficients     0   alpha0 (J), alpha1, alpha2, gamma (J), delta -- in that order
u_unit           1   U_i, one per unit
u_time           2   U_t, one per period (two-way designs only)
epsilon          3   confounder noise, N*T x J standard normals
eta              4   treatment noise, N*T standard normals
mu               5   outcome innovations, N x T standard normals
mixing           6   J x J matrix A with Sigma = A'A (correlated confounders)
==============  ===  ==========================================================

The outcome noise follows a stationary AR(1) per unit: the first period is
drawn from N(0, 1/(1 - rho^2)), so rho = 0 gives i.i.d. standard normals.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError
from .paneldata import PanelDataset

__all__ = [
    "Structure",
    "FunctionalForm",
    "DgpConfig",
    "normalize_dgp_keys",
    "SimulationTruth",
    "eval_form",
    "ar1_path",
    "ar1_paths",
    "derive_seed",
    "stream",
    "gen_baseline",
    "gen_multi_confounder",
    "gen_twoway",
    "generate",
]

TRUE_BETA = 1.0

STREAMS = {
    "coefficients": 0,
    "u_unit": 1,
    "u_time": 2,
    "epsilon": 3,
    "eta": 4,
    "mu": 5,
    "mixing": 6,
}


class Structure(str, enum.Enum):
    """Which variables the unit heterogeneity U enters."""

    A = "A"  # U absent
    B = "B"  # U -> W, Y
    C = "C"  # U -> X, W, Y

    @classmethod
    def parse(cls, value: "Structure | str") -> "Structure":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        aliases = {"A_NOU": "A", "B_U_NOT_X": "B", "C_U_TO_X": "C"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown causal structure {value!r}; use A, B or C") from None


class FunctionalForm(str, enum.Enum):
    """Shape of the observed confounding, shared by the treatment and outcome equations."""

    LINEAR = "linear"
    USHAPED = "ushaped"

    @classmethod
    def parse(cls, value: "FunctionalForm | str") -> "FunctionalForm":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown functional form {value!r}") from None

    def __call__(self, x):
        return eval_form(self, x)


def eval_form(form: FunctionalForm | str, x):
    """Evaluate the confounding function: identity or square."""
    form = FunctionalForm.parse(form)
    if form is FunctionalForm.LINEAR:
        return x
    return np.square(x) if isinstance(x, np.ndarray) else x * x


_ALIASES = (("N", "n_units"), ("T", "n_periods"), ("J", "n_confounders"), ("form", "functional_form"))


def normalize_dgp_keys(data: Mapping[str, Any]) -> dict[str, Any]:
    """Rename the short aliases ``N``, ``T``, ``J`` and ``form`` to field names."""
    out = dict(data)
    for short, long in _ALIASES:
        if short in out:
            if long in out:
                raise ConfigError(f"DGP key {long!r} given twice (as {short!r} and {long!r})")
            out[long] = out.pop(short)
    return out


@dataclass(frozen=True)
class DgpConfig:
    n_units: int
    n_periods: int
    n_confounders: int = 1
    structure: Structure = Structure.C
    functional_form: FunctionalForm = FunctionalForm.USHAPED
    rho: float = 0.0
    two_way: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "structure", Structure.parse(self.structure))
        object.__setattr__(self, "functional_form", FunctionalForm.parse(self.functional_form))
        if self.n_units < 2 or self.n_periods < 2:
            raise ConfigError(
                f"need N >= 2 and T >= 2, got N={self.n_units}, T={self.n_periods}"
            )
        if self.n_confounders < 1:
            raise ConfigError(f"need J >= 1 confounders, got {self.n_confounders}")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError(f"AR(1) coefficient must satisfy 0 <= rho < 1, got {self.rho}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DgpConfig":
        data = normalize_dgp_keys(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown DGP keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["structure"] = self.structure.value
        d["functional_form"] = self.functional_form.value
        return d

    def with_seed(self, seed: int) -> "DgpConfig":
        return DgpConfig(**{**self.to_dict(), "seed": int(seed)})


@dataclass(frozen=True, eq=False)
class SimulationTruth:
    """Generating parameters hidden from feasible estimators."""

    beta: float
    gamma: NDArray[np.float64]
    delta: float
    alpha0: NDArray[np.float64]
    alpha1: float
    alpha2: float
    u_unit: NDArray[np.float64]
    functional_form: FunctionalForm
    u_time: NDArray[np.float64] | None = None
    sigma: NDArray[np.float64] | None = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "beta": self.beta,
            "gamma": self.gamma.tolist(),
            "delta": self.delta,
            "alpha0": self.alpha0.tolist(),
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "u_unit": self.u_unit.tolist(),
            "u_time": None if self.u_time is None else self.u_time.tolist(),
            "functional_form": self.functional_form.value,
            "sigma": None if self.sigma is None else self.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SimulationTruth":
        def arr(v):
            return None if v is None else np.asarray(v, dtype=float)

        return cls(
            beta=float(d["beta"]),
            gamma=np.atleast_1d(arr(d["gamma"])),
            delta=float(d["delta"]),
            alpha0=np.atleast_1d(arr(d["alpha0"])),
            alpha1=float(d["alpha1"]),
            alpha2=float(d["alpha2"]),
            u_unit=arr(d["u_unit"]),
            u_time=arr(d.get("u_time")),
            functional_form=FunctionalForm.parse(d["functional_form"]),
            sigma=arr(d.get("sigma")),
        )


@dataclass(frozen=True)
class _Hooks:
    """Test-only overrides; never reachable from the CLI."""

    eps_scale: float = 1.0
    eta_scale: float = 1.0
    mu_scale: float = 1.0
    gamma: float | None = None
    delta: float | None = None
    zero_u_time: bool = False
    u_seed: int | None = None


def derive_seed(base: int, *keys: int) -> int:
    """Deterministic 64-bit child seed of ``base`` for the integer path ``keys``."""
    ss = np.random.SeedSequence(entropy=int(base), spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent Philox generator for one named random object."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS[name],))
    return np.random.Generator(np.random.Philox(ss))


def ar1_paths(rho: float, n_paths: int, length: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Stationary AR(1) paths ``mu_t = rho * mu_{t-1} + e_t`` with N(0, 1) innovations.

    Returns an array of shape ``(n_paths, length)``.
    """
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"AR(1) coefficient must satisfy 0 <= rho < 1, got {rho}")
    e = rng.standard_normal((n_paths, length))
    if rho == 0.0:
        return e
    out = np.empty_like(e)
    out[:, 0] = e[:, 0] / np.sqrt(1.0 - rho * rho)
    for t in range(1, length):
        out[:, t] = rho * out[:, t - 1] + e[:, t]
    return out


def ar1_path(rho: float, length: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """A single stationary AR(1) path of ``length`` steps."""
    return ar1_paths(rho, 1, length, rng)[0]


def _simulate(cfg: DgpConfig, correlated: bool, hooks: _Hooks) -> tuple[PanelDataset, SimulationTruth]:
    n, t, j = cfg.n_units, cfg.n_periods, cfg.n_confounders
    seed = cfg.seed

    coef = stream(seed, "coefficients")
    alpha0 = coef.standard_normal(j)
    alpha1, alpha2 = coef.standard_normal(2)
    gamma = coef.standard_normal(j)
    delta = float(coef.standard_normal())
    if hooks.gamma is not None:
        gamma = np.full(j, float(hooks.gamma))
    if hooks.delta is not None:
        delta = float(hooks.delta)

    u_seed = seed if hooks.u_seed is None else hooks.u_seed
    u_unit = stream(u_seed, "u_unit").standard_normal(n)
    u_time = None
    het = np.repeat(u_unit, t)
    if cfg.two_way:
        u_time = stream(u_seed, "u_time").standard_normal(t)
        if hooks.zero_u_time:
            u_time = np.zeros(t)
        het = het + np.tile(u_time, n)
    het = delta * het

    z = stream(seed, "epsilon").standard_normal((n * t, j))
    sigma = None
    if correlated:
        a = stream(seed, "mixing").standard_normal((j, j))
        sigma = a.T @ a
        eps = z @ a  # rows ~ N(0, A'A)
    else:
        eps = z
    eps = hooks.eps_scale * eps

    x = alpha0 + eps
    if cfg.structure is Structure.C:
        x = x + het[:, None]

    confounding = eval_form(cfg.functional_form, x) @ (gamma / j)
    u_term = het if cfg.structure is not Structure.A else np.zeros(n * t)

    eta = hooks.eta_scale * stream(seed, "eta").standard_normal(n * t)
    w = alpha1 + confounding + u_term + eta

    mu = hooks.mu_scale * ar1_paths(cfg.rho, n, t, stream(seed, "mu")).reshape(-1)
    y = alpha2 + TRUE_BETA * w + confounding + u_term + mu

    data = PanelDataset(n_units=n, n_periods=t, outcome=y, treatment=w, confounders=x)
    truth = SimulationTruth(
        beta=TRUE_BETA,
        gamma=gamma,
        delta=delta,
        alpha0=alpha0,
        alpha1=float(alpha1),
        alpha2=float(alpha2),
        u_unit=u_unit,
        u_time=u_time,
        functional_form=cfg.functional_form,
        sigma=sigma,
    )
    return data, truth


def gen_baseline(cfg: DgpConfig, _hooks: _Hooks | None = None) -> tuple[PanelDataset, SimulationTruth]:
    """Single-confounder design with standard normal confounder noise."""
    if cfg.n_confounders != 1:
        raise ConfigError(f"baseline design has exactly one confounder, got J={cfg.n_confounders}")
    if cfg.two_way:
        raise ConfigError("baseline design is one-way; use gen_twoway for two_way=True")
    return _simulate(cfg, correlated=False, hooks=_hooks or _Hooks())


def gen_multi_confounder(
    cfg: DgpConfig, _hooks: _Hooks | None = None
) -> tuple[PanelDataset, SimulationTruth]:
    """J confounders with jointly normal noise of random covariance ``A'A``.

    Each confounder's coefficient is divided by J so the total confounding
    strength stays comparable across J.
    """
    if cfg.n_confounders < 1:
        raise ConfigError(f"need J >= 1 confounders, got {cfg.n_confounders}")
    return _simulate(cfg, correlated=True, hooks=_hooks or _Hooks())


def gen_twoway(cfg: DgpConfig, _hooks: _Hooks | None = None) -> tuple[PanelDataset, SimulationTruth]:
    """Unit heterogeneity plus period heterogeneity ``U_t`` with the same loading delta.

    With one confounder the noise law matches :func:`gen_baseline`; with more
    it matches :func:`gen_multi_confounder`.
    """
    if not cfg.two_way:
        raise ConfigError("gen_twoway requires two_way=True")
    return _simulate(cfg, correlated=cfg.n_confounders > 1, hooks=_hooks or _Hooks())


GENERATORS = ("auto", "baseline", "multi_confounder", "twoway")


def generate(cfg: DgpConfig, generator: str = "auto") -> tuple[PanelDataset, SimulationTruth]:
    """Dispatch to a generator by name; ``auto`` picks from ``J`` and ``two_way``."""
    if generator not in GENERATORS:
        raise ConfigError(f"unknown generator {generator!r}; choose from {GENERATORS}")
    if generator == "auto":
        if cfg.two_way:
            generator = "twoway"
        elif cfg.n_confounders == 1:
            generator = "baseline"
        else:
            generator = "multi_confounder"
    if generator == "baseline":
        return gen_baseline(cfg)
    if generator == "multi_confounder":
        return gen_multi_confounder(cfg)
    return gen_twoway(cfg)
