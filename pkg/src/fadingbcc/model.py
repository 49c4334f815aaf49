"""Domain types, unit conventions, and fading-state discretization.

Channel states are pairs z = (z_M, z_E) of magnitude-square fading gains for
the main receiver and the eavesdropper.  A state belongs to the secure set Z
when z_M > gamma * z_E (strictly); only there may confidential power flow.
Grids discretize the joint gain distribution as weighted atoms so that every
expectation in the solver becomes a finite weighted sum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import log

import numpy as np

LN2 = log(2.0)

# Relative perturbation used to split tied tensor atoms (z_M == z_E) into a
# mirrored pair.  Keeps first moments exact and second moments to O(eps^2),
# while leaving zero probability mass exactly on the symmetry line.
_TIE_SPLIT_EPS = 1e-9

_GRID_METHODS = ("quadrature", "monte_carlo", "explicit")


@dataclass(frozen=True)
class QosConfig:
    """QoS and link parameters.

    theta is the buffer-decay exponent in 1/bits, frame_T the frame length in
    seconds, bandwidth_B in Hz, snr the linear average transmit SNR and gamma
    the receiver noise-power ratio N1/N2.  The derived exponent
    beta = theta * frame_T * bandwidth_B / ln 2 is the unique value for which
    (1 + x)^(-beta) equals exp(-theta T B log2(1 + x)).
    """

    theta: float
    frame_T: float
    bandwidth_B: float
    snr: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")
        if not self.frame_T > 0:
            raise ValueError(f"frame_T must be > 0, got {self.frame_T}")
        if not self.bandwidth_B > 0:
            raise ValueError(f"bandwidth_B must be > 0, got {self.bandwidth_B}")
        if not self.snr >= 0:
            raise ValueError(f"snr must be >= 0, got {self.snr}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")

    @property
    def beta(self) -> float:
        return self.theta * self.frame_T * self.bandwidth_B / LN2

    def with_theta(self, theta: float) -> "QosConfig":
        return QosConfig(theta, self.frame_T, self.bandwidth_B, self.snr, self.gamma)


@dataclass(frozen=True)
class FadingSample:
    """One discrete fading state with its probability mass."""

    z_M: float
    z_E: float
    weight: float

    def __post_init__(self) -> None:
        if self.z_M < 0 or self.z_E < 0:
            raise ValueError("fading gains must be nonnegative")
        if not 0 < self.weight <= 1:
            raise ValueError(f"weight must be in (0, 1], got {self.weight}")


@dataclass(frozen=True)
class FadingGrid:
    """Immutable weighted sample set representing the joint gain state.

    Arrays are the primary storage (read-only); `samples` materializes the
    ordered FadingSample view.  Identical (method, parameters, seed) inputs
    reproduce the grid bit-for-bit.
    """

    z_m: np.ndarray
    z_e: np.ndarray
    weights: np.ndarray
    method: str
    seed: int | None = None
    params: tuple = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.method not in _GRID_METHODS:
            raise ValueError(f"unknown grid method {self.method!r}")
        z_m = np.asarray(self.z_m, dtype=float)
        z_e = np.asarray(self.z_e, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if not (z_m.shape == z_e.shape == w.shape) or z_m.ndim != 1 or z_m.size == 0:
            raise ValueError("z_m, z_e, weights must be equal-length 1-D arrays")
        if np.any(z_m < 0) or np.any(z_e < 0):
            raise ValueError("fading gains must be nonnegative")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 within 1e-12, got {w.sum()!r}")
        for arr, name in ((z_m, "z_m"), (z_e, "z_e"), (w, "weights")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.z_m.size

    @property
    def samples(self) -> tuple[FadingSample, ...]:
        return tuple(
            FadingSample(float(m), float(e), float(w))
            for m, e, w in zip(self.z_m, self.z_e, self.weights)
        )

    def secure_mask(self, gamma: float) -> np.ndarray:
        """Boolean mask of states in Z = {z_M > gamma * z_E} (strict)."""
        return self.z_m > gamma * self.z_e

    def secure_mass(self, gamma: float) -> float:
        return float(self.weights[self.secure_mask(gamma)].sum())


def in_secure_set(s: FadingSample, gamma: float) -> bool:
    """True iff z_M > gamma * z_E; the boundary belongs to the complement."""
    return s.z_M > gamma * s.z_E


def build_rayleigh_grid(
    mean_M: float,
    mean_E: float,
    nodes_per_dim: int,
    method: str = "quadrature",
    seed: int | None = None,
) -> FadingGrid:
    """Discretize independent exponential gains z_M ~ Exp(1/mean_M), z_E ~ Exp(1/mean_E).

    quadrature: tensor product of Gauss-Laguerre nodes per dimension, weights
    normalized to sum exactly to one.  Tensor atoms with z_M == z_E (only
    possible for equal means) are split into a mirrored pair straddling the
    tie line, so the discrete grid, like the continuous law, carries no mass
    on z_M == z_E.

    monte_carlo: nodes_per_dim**2 i.i.d. exponential draws with equal weights,
    reproducible from the seed.
    """
    if mean_M <= 0 or mean_E <= 0:
        raise ValueError("channel gain means must be positive")
    if nodes_per_dim < 2:
        raise ValueError("nodes_per_dim must be >= 2")

    if method == "quadrature":
        x, w = np.polynomial.laguerre.laggauss(nodes_per_dim)
        w = w / w.sum()
        zm = np.repeat(x * mean_M, nodes_per_dim)
        ze = np.tile(x * mean_E, nodes_per_dim)
        ww = np.repeat(w, nodes_per_dim) * np.tile(w, nodes_per_dim)
        tie = zm == ze
        if np.any(tie):
            zt, wt = zm[tie], ww[tie]
            keep = ~tie
            zm_split = np.concatenate([zt * (1 + _TIE_SPLIT_EPS), zt * (1 - _TIE_SPLIT_EPS)])
            ze_split = np.concatenate([zt * (1 - _TIE_SPLIT_EPS), zt * (1 + _TIE_SPLIT_EPS)])
            w_split = np.concatenate([wt, wt]) / 2.0
            zm = np.concatenate([zm[keep], zm_split])
            ze = np.concatenate([ze[keep], ze_split])
            ww = np.concatenate([ww[keep], w_split])
        ww = ww / ww.sum()
        return FadingGrid(zm, ze, ww, "quadrature", seed=None,
                          params=(mean_M, mean_E, nodes_per_dim))

    if method == "monte_carlo":
        if seed is None:
            raise ValueError("monte_carlo grids require a seed for reproducibility")
        n = nodes_per_dim * nodes_per_dim
        rng = np.random.default_rng(seed)
        zm = rng.exponential(mean_M, size=n)
        ze = rng.exponential(mean_E, size=n)
        ww = np.full(n, 1.0 / n)
        return FadingGrid(zm, ze, ww, "monte_carlo", seed=seed,
                          params=(mean_M, mean_E, nodes_per_dim))

    raise ValueError(f"unknown grid method {method!r}")


def explicit_grid(states: list[tuple[float, float, float]]) -> FadingGrid:
    """Build an explicit grid from (z_M, z_E, weight) triples; weights are renormalized."""
    if not states:
        raise ValueError("explicit grid needs at least one state")
    arr = np.asarray(states, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("states must be (z_M, z_E, weight) triples")
    w = arr[:, 2]
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return FadingGrid(arr[:, 0], arr[:, 1], w / w.sum(), "explicit")


def load_grid_csv(path) -> FadingGrid:
    """Load an explicit grid from a CSV of z_M, z_E, weight rows.

    A header row is allowed and detected by non-numeric first field.
    """
    rows: list[tuple[float, float, float]] = []
    with open(path, newline="") as fh:
        for i, rec in enumerate(csv.reader(fh)):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) < 3:
                raise ValueError(f"{path}: row {i + 1} needs z_M, z_E, weight")
            try:
                rows.append((float(rec[0]), float(rec[1]), float(rec[2])))
            except ValueError:
                if i == 0:
                    continue  # header
                raise ValueError(f"{path}: non-numeric row {i + 1}: {rec!r}") from None
    return explicit_grid(rows)
