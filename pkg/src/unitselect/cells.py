"""Per-cell aggregation of finite samples and bound-label construction.

Counting is plain tallying, estimates are raw frequentist ratios (no
smoothing), and a cell earns labels only when both regimes observed it at
least ``threshold`` times, both experimental arms are populated, and the
estimated interval is consistent.  Everything else lands in a drop log with a
reason code.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bounds import (
    BenefitVector,
    ExperimentalDistribution,
    ObservationalJoint,
    benefit_bounds,
    value_range,
)
from .datagen import REGIMES, Sample
from .model import CellKey

__all__ = [
    "DEFAULT_THRESHOLD",
    "BELOW_THRESHOLD",
    "ZERO_ARM",
    "INCONSISTENT",
    "CellCounts",
    "LabeledCell",
    "DroppedCell",
    "SplitSpec",
    "IneligibleCellError",
    "aggregate",
    "estimate",
    "build_labels",
    "split",
    "write_labels_csv",
    "read_labels_csv",
    "write_drops_csv",
]

DEFAULT_THRESHOLD = 1300

# Drop-log reason codes.
BELOW_THRESHOLD = "BELOW_THRESHOLD"
ZERO_ARM = "ZERO_ARM"
INCONSISTENT = "INCONSISTENT"

# Vectorized counting allocates 4 * 2**n_observed slots; beyond this width we
# fall back to row-at-a-time counting.
_MAX_BINCOUNT_OBSERVED = 20


class IneligibleCellError(ValueError):
    """A cell's counts cannot support a frequentist estimate."""


@dataclass
class CellCounts:
    """Tallies for one cell, across both regimes."""

    exp_treated: int = 0
    exp_treated_y1: int = 0
    exp_control: int = 0
    exp_control_y1: int = 0
    obs_xy: int = 0
    obs_xyp: int = 0
    obs_xpy: int = 0
    obs_xpyp: int = 0

    @property
    def n_exp(self) -> int:
        return self.exp_treated + self.exp_control

    @property
    def n_obs(self) -> int:
        return self.obs_xy + self.obs_xyp + self.obs_xpy + self.obs_xpyp


@dataclass(frozen=True)
class LabeledCell:
    """A cell eligible for training, with its estimated bound labels."""

    cell: CellKey
    lower_label: float
    upper_label: float
    n_exp: int
    n_obs: int
    consistent: bool = True


@dataclass(frozen=True)
class DroppedCell:
    cell: CellKey
    reason: str
    n_exp: int
    n_obs: int


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


def _add_row(counts: CellCounts, regime: str, x: int, y: int) -> None:
    if regime == "experimental":
        if x:
            counts.exp_treated += 1
            counts.exp_treated_y1 += y
        else:
            counts.exp_control += 1
            counts.exp_control_y1 += y
    else:
        if x and y:
            counts.obs_xy += 1
        elif x:
            counts.obs_xyp += 1
        elif y:
            counts.obs_xpy += 1
        else:
            counts.obs_xpyp += 1


def _aggregate_array(
    data: np.ndarray, regime: str, into: dict[CellKey, CellCounts]
) -> dict[CellKey, CellCounts]:
    n_observed = data.shape[1] - 2
    if n_observed > _MAX_BINCOUNT_OBSERVED:
        for row in data:
            key = CellKey(tuple(int(b) for b in row[:n_observed]))
            _add_row(into.setdefault(key, CellCounts()), regime, int(row[-2]), int(row[-1]))
        return into

    ids = data[:, :n_observed].astype(np.int64) @ (1 << np.arange(n_observed, dtype=np.int64))
    combo = ids * 4 + data[:, -2].astype(np.int64) * 2 + data[:, -1].astype(np.int64)
    tallies = np.bincount(combo, minlength=4 << n_observed).reshape(-1, 4)
    for cid in np.nonzero(tallies.sum(axis=1))[0]:
        key = CellKey.from_id(int(cid), n_observed)
        counts = into.setdefault(key, CellCounts())
        c00, c01, c10, c11 = (int(v) for v in tallies[cid])
        if regime == "experimental":
            counts.exp_treated += c10 + c11
            counts.exp_treated_y1 += c11
            counts.exp_control += c00 + c01
            counts.exp_control_y1 += c01
        else:
            counts.obs_xy += c11
            counts.obs_xyp += c10
            counts.obs_xpy += c01
            counts.obs_xpyp += c00
    return into


def aggregate(
    samples: Iterable[Sample] | np.ndarray,
    regime: str,
    into: dict[CellKey, CellCounts] | None = None,
) -> dict[CellKey, CellCounts]:
    """Tally samples into per-cell counts for one regime.

    Accepts either a stream of Sample records or a (n, n_observed+2) 0/1
    array as produced by datagen.  Pass ``into`` to merge across shards; the
    merge is plain addition, so shard order never matters.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    out = {} if into is None else into
    if isinstance(samples, np.ndarray):
        if samples.ndim != 2 or samples.shape[1] < 3:
            raise ValueError("sample array must be (n, n_observed+2)")
        return _aggregate_array(samples, regime, out)
    width: int | None = None
    for s in samples:
        if width is None:
            width = len(s.z_obs)
        elif len(s.z_obs) != width:
            raise ValueError("samples have mixed observed widths")
        _add_row(out.setdefault(CellKey(s.z_obs), CellCounts()), regime, s.x, s.y)
    return out


def estimate(counts: CellCounts) -> tuple[ExperimentalDistribution, ObservationalJoint]:
    """Frequentist ratios for one cell; raises when an arm is empty."""
    if counts.exp_treated == 0 or counts.exp_control == 0:
        raise IneligibleCellError("empty experimental arm")
    if counts.n_obs == 0:
        raise IneligibleCellError("no observational samples")
    exp = ExperimentalDistribution(
        p_y_do_x=counts.exp_treated_y1 / counts.exp_treated,
        p_y_do_xp=counts.exp_control_y1 / counts.exp_control,
    )
    n = counts.n_obs
    obs = ObservationalJoint(
        p_xy=counts.obs_xy / n,
        p_xyp=counts.obs_xyp / n,
        p_xpy=counts.obs_xpy / n,
        p_xpyp=counts.obs_xpyp / n,
    )
    return exp, obs


def build_labels(
    exp_map: Mapping[CellKey, CellCounts],
    obs_map: Mapping[CellKey, CellCounts],
    v: BenefitVector,
    threshold: int = DEFAULT_THRESHOLD,
) -> tuple[list[LabeledCell], list[DroppedCell]]:
    """Bound labels for every eligible cell, plus the drop log.

    A cell is eligible when it was seen at least ``threshold`` times in each
    regime.  Cells seen in neither map do not appear in either output.
    Results are sorted by cell id.
    """
    labels: list[LabeledCell] = []
    drops: list[DroppedCell] = []
    keys = sorted(set(exp_map) | set(obs_map), key=lambda c: c.id)
    lo, hi = value_range(v)
    for key in keys:
        exp_counts = exp_map.get(key, CellCounts())
        obs_counts = obs_map.get(key, CellCounts())
        n_exp = exp_counts.n_exp
        n_obs = obs_counts.n_obs
        if n_exp < threshold or n_obs < threshold:
            drops.append(DroppedCell(key, BELOW_THRESHOLD, n_exp, n_obs))
            continue
        merged = CellCounts(
            exp_treated=exp_counts.exp_treated,
            exp_treated_y1=exp_counts.exp_treated_y1,
            exp_control=exp_counts.exp_control,
            exp_control_y1=exp_counts.exp_control_y1,
            obs_xy=obs_counts.obs_xy,
            obs_xyp=obs_counts.obs_xyp,
            obs_xpy=obs_counts.obs_xpy,
            obs_xpyp=obs_counts.obs_xpyp,
        )
        try:
            e, o = estimate(merged)
        except IneligibleCellError:
            drops.append(DroppedCell(key, ZERO_ARM, n_exp, n_obs))
            continue
        b = benefit_bounds(v, e, o)
        if not b.consistent:
            drops.append(DroppedCell(key, INCONSISTENT, n_exp, n_obs))
            continue
        labels.append(
            LabeledCell(
                cell=key,
                lower_label=min(max(b.lower, lo), hi),
                upper_label=min(max(b.upper, lo), hi),
                n_exp=n_exp,
                n_obs=n_obs,
            )
        )
    return labels, drops


def split(
    labeled: Sequence[LabeledCell], spec: SplitSpec
) -> tuple[list[LabeledCell], list[LabeledCell]]:
    """Seeded shuffle, then the first ceil(test_fraction * n) cells form the
    test set.  Returns (train, test)."""
    if not labeled:
        raise ValueError("cannot split an empty label list")
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    order = rng.permutation(len(labeled))
    n_test = math.ceil(spec.test_fraction * len(labeled))
    test = [labeled[i] for i in order[:n_test]]
    train = [labeled[i] for i in order[n_test:]]
    return train, test


def _labels_header(n_observed: int) -> list[str]:
    return (
        ["cell_id"]
        + [f"z{i + 1}" for i in range(n_observed)]
        + ["lower_label", "upper_label", "n_exp", "n_obs"]
    )


def write_labels_csv(labels: Sequence[LabeledCell], path: str | Path, n_observed: int) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(_labels_header(n_observed))
        for lab in labels:
            writer.writerow(
                [lab.cell.id]
                + list(lab.cell.bits)
                + [
                    format(lab.lower_label, ".12g"),
                    format(lab.upper_label, ".12g"),
                    lab.n_exp,
                    lab.n_obs,
                ]
            )


def read_labels_csv(path: str | Path) -> list[LabeledCell]:
    labels: list[LabeledCell] = []
    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if (
            len(header) < 6
            or header[0] != "cell_id"
            or header[-4:] != ["lower_label", "upper_label", "n_exp", "n_obs"]
        ):
            raise ValueError(f"unexpected labels header in {path}")
        n_observed = len(header) - 5
        for row in reader:
            bits = tuple(int(b) for b in row[1 : 1 + n_observed])
            cell = CellKey(bits)
            if cell.id != int(row[0]):
                raise ValueError(f"cell_id/bits mismatch in {path}: {row[0]}")
            labels.append(
                LabeledCell(
                    cell=cell,
                    lower_label=float(row[1 + n_observed]),
                    upper_label=float(row[2 + n_observed]),
                    n_exp=int(row[3 + n_observed]),
                    n_obs=int(row[4 + n_observed]),
                )
            )
    return labels


def write_drops_csv(drops: Sequence[DroppedCell], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "reason", "n_exp", "n_obs"])
        for d in drops:
            writer.writerow([d.cell.id, d.reason, d.n_exp, d.n_obs])
