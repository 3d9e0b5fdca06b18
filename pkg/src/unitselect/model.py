"""Structural causal model with binary characteristics, a threshold treatment
mechanism and a double-window outcome mechanism.

The model family: ``n_observed + n_unobserved`` independent Bernoulli
characteristics ``z``, a binary treatment ``x = [m_x(z) + u_x > 0.5]`` and a
binary outcome ``y = [c*x + m_y(z) + u_y in (0,1) or (1,2)]``, where ``m_x``
and ``m_y`` are fixed linear scores of the characteristics and ``u_x``, ``u_y``
are Bernoulli noise bits.  All threshold comparisons are strict; a score that
lands exactly on 0, 0.5, 1 or 2 takes the zero branch.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from functools import cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ConfigError",
    "ScmConfig",
    "FullProfile",
    "CellKey",
    "ExogenousAssignment",
    "ResponseType",
    "default_config",
    "random_config",
    "m_value",
    "eval_x",
    "eval_y",
    "counterfactual_pair",
    "response_type",
]


class ConfigError(ValueError):
    """A model configuration or profile violates its invariants."""


def _as_prob(value: float, name: str) -> float:
    p = float(value)
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")
    return p


@dataclass(frozen=True)
class ScmConfig:
    """Full parameterization of the data-generating model.

    The first ``n_observed`` characteristics are visible to downstream
    consumers; the remaining ``n_unobserved`` are latent.  ``weights_x`` and
    ``weights_y`` are the linear score columns for the treatment and outcome
    mechanisms, ``bern_z`` holds one Bernoulli parameter per characteristic,
    and ``experiment_assign_prob`` is the treatment assignment rate under
    randomized experiments.
    """

    n_observed: int
    n_unobserved: int
    weights_x: tuple[float, ...]
    weights_y: tuple[float, ...]
    bern_z: tuple[float, ...]
    bern_ux: float
    bern_uy: float
    constant_c: float
    experiment_assign_prob: float = 0.5

    def __post_init__(self) -> None:
        if self.n_observed < 1:
            raise ConfigError(f"n_observed must be >= 1, got {self.n_observed}")
        if self.n_unobserved < 0:
            raise ConfigError(f"n_unobserved must be >= 0, got {self.n_unobserved}")
        n = self.n_observed + self.n_unobserved
        for name in ("weights_x", "weights_y", "bern_z"):
            vec = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vec)
            if len(vec) != n:
                raise ConfigError(
                    f"{name} must have length n_observed + n_unobserved = {n}, "
                    f"got {len(vec)}"
                )
            if not all(np.isfinite(vec)):
                raise ConfigError(f"{name} contains non-finite entries")
        for p in self.bern_z:
            _as_prob(p, "bern_z entry")
        object.__setattr__(self, "bern_ux", _as_prob(self.bern_ux, "bern_ux"))
        object.__setattr__(self, "bern_uy", _as_prob(self.bern_uy, "bern_uy"))
        object.__setattr__(
            self,
            "experiment_assign_prob",
            _as_prob(self.experiment_assign_prob, "experiment_assign_prob"),
        )
        if not np.isfinite(self.constant_c):
            raise ConfigError("constant_c must be finite")
        object.__setattr__(self, "constant_c", float(self.constant_c))

    @property
    def n_total(self) -> int:
        return self.n_observed + self.n_unobserved

    def to_dict(self) -> dict:
        return {
            "n_observed": self.n_observed,
            "n_unobserved": self.n_unobserved,
            "weights_x": list(self.weights_x),
            "weights_y": list(self.weights_y),
            "bern_z": list(self.bern_z),
            "bern_ux": self.bern_ux,
            "bern_uy": self.bern_uy,
            "constant_c": self.constant_c,
            "experiment_assign_prob": self.experiment_assign_prob,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScmConfig":
        try:
            return cls(
                n_observed=int(data["n_observed"]),
                n_unobserved=int(data["n_unobserved"]),
                weights_x=tuple(data["weights_x"]),
                weights_y=tuple(data["weights_y"]),
                bern_z=tuple(data["bern_z"]),
                bern_ux=data["bern_ux"],
                bern_uy=data["bern_uy"],
                constant_c=data["constant_c"],
                experiment_assign_prob=data.get("experiment_assign_prob", 0.5),
            )
        except KeyError as exc:
            raise ConfigError(f"config is missing key {exc.args[0]!r}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "ScmConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def canonical_json(self) -> str:
        """Whitespace- and order-normalized serialization.

        Two configs have equal canonical JSON iff their parsed values are
        equal, regardless of how the source files were formatted.
        """
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def fingerprint(self) -> str:
        """SHA-256 hex digest of the canonical serialization."""
        return hashlib.sha256(self.canonical_json().encode("ascii")).hexdigest()


def _check_bits(bits: Iterable[int]) -> tuple[int, ...]:
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ConfigError(f"bit vector must contain only 0/1, got {out}")
    return out


@dataclass(frozen=True)
class FullProfile:
    """One complete assignment of all characteristics, observed then latent."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", _check_bits(self.bits))

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class CellKey:
    """An assignment of the observed characteristics only.

    The integer ``id`` encodes the bits with the first observed characteristic
    as the least-significant bit, so ids run 0 .. 2**n_observed - 1.
    """

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        bits = _check_bits(self.bits)
        if not bits:
            raise ConfigError("CellKey needs at least one observed bit")
        object.__setattr__(self, "bits", bits)

    @property
    def id(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    @classmethod
    def from_id(cls, cell_id: int, n_observed: int) -> "CellKey":
        if not 0 <= cell_id < (1 << n_observed):
            raise ConfigError(
                f"cell id {cell_id} out of range for {n_observed} observed bits"
            )
        return cls(tuple((cell_id >> i) & 1 for i in range(n_observed)))

    def complete(self, latent_bits: Sequence[int]) -> FullProfile:
        """Append latent characteristic bits to form a full profile."""
        return FullProfile(self.bits + tuple(latent_bits))


@dataclass(frozen=True)
class ExogenousAssignment:
    """One realization of all exogenous noise bits."""

    z: tuple[int, ...]
    u_x: int
    u_y: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", _check_bits(self.z))
        object.__setattr__(self, "u_x", int(self.u_x))
        object.__setattr__(self, "u_y", int(self.u_y))


class ResponseType(Enum):
    """Counterfactual behavior of one unit: outcome under (no treatment, treatment)."""

    COMPLIER = "complier"        # (0, 1)
    ALWAYS_TAKER = "always_taker"  # (1, 1)
    NEVER_TAKER = "never_taker"  # (0, 0)
    DEFIER = "defier"            # (1, 0)


_RESPONSE_BY_PAIR = {
    (0, 1): ResponseType.COMPLIER,
    (1, 1): ResponseType.ALWAYS_TAKER,
    (0, 0): ResponseType.NEVER_TAKER,
    (1, 0): ResponseType.DEFIER,
}


@cache
def default_config() -> ScmConfig:
    """The reference model bundled with the package (15 observed + 5 latent)."""
    text = resources.files("unitselect").joinpath("data/appendix_model.json").read_text()
    return ScmConfig.from_dict(json.loads(text))


def random_config(
    n_observed: int,
    n_unobserved: int,
    seed: int,
    experiment_assign_prob: float = 0.5,
) -> ScmConfig:
    """Draw a model of the same family with random parameters.

    Weights and the outcome constant are uniform on [-1, 1]; every Bernoulli
    parameter is uniform on [0, 1].  Useful for desk-scale models where the
    full cell space can be enumerated.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    n = n_observed + n_unobserved
    return ScmConfig(
        n_observed=n_observed,
        n_unobserved=n_unobserved,
        weights_x=tuple(rng.uniform(-1.0, 1.0, n)),
        weights_y=tuple(rng.uniform(-1.0, 1.0, n)),
        bern_z=tuple(rng.uniform(0.0, 1.0, n)),
        bern_ux=float(rng.uniform(0.0, 1.0)),
        bern_uy=float(rng.uniform(0.0, 1.0)),
        constant_c=float(rng.uniform(-1.0, 1.0)),
        experiment_assign_prob=experiment_assign_prob,
    )


def m_value(profile: FullProfile, weights: Sequence[float]) -> float:
    """Linear score of a profile: dot product of its bits with a weight column."""
    if len(profile.bits) != len(weights):
        raise ConfigError(
            f"profile has {len(profile.bits)} bits but weight column has "
            f"{len(weights)} entries"
        )
    return float(sum(w for b, w in zip(profile.bits, weights) if b))


def eval_x(m_x: float, u_x: int) -> int:
    """Treatment mechanism: 1 iff m_x + u_x > 0.5 (strict)."""
    return 1 if m_x + u_x > 0.5 else 0


def eval_y(x: int, m_y: float, u_y: int, c: float) -> int:
    """Outcome mechanism: 1 iff c*x + m_y + u_y falls strictly inside (0,1) or (1,2)."""
    s = c * x + m_y + u_y
    return 1 if (0.0 < s < 1.0 or 1.0 < s < 2.0) else 0


def counterfactual_pair(
    profile: FullProfile, u_y: int, config: ScmConfig
) -> tuple[int, int]:
    """Outcome under both forced treatments, as (y without treatment, y with treatment)."""
    m_y = m_value(profile, config.weights_y)
    return (
        eval_y(0, m_y, u_y, config.constant_c),
        eval_y(1, m_y, u_y, config.constant_c),
    )


def response_type(pair: tuple[int, int]) -> ResponseType:
    """Classify a counterfactual outcome pair into its response type."""
    return _RESPONSE_BY_PAIR[(int(pair[0]), int(pair[1]))]
