"""Effective-throughput functionals and the phi normalization aggregates.

For a per-state rate profile r (bits/s/Hz) under QoS exponent theta, the
supportable constant arrival rate normalized by bandwidth is

    C = -(1 / (beta ln 2)) * ln E{ 2^(-beta r) },     beta = theta T B / ln 2.

The phi aggregates are the expectations E{x^(-beta)} of the per-state SNR
factors x of the common and confidential rates; the outer solver treats them
as fixed-point unknowns because the optimal policy depends on them.

Everything is evaluated through expm1/log1p in the exponent so the theta -> 0
(ergodic) limit and large-beta regimes are both numerically clean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LN2, FadingGrid, QosConfig
from .rates import PowerPolicy, rate_profiles


@dataclass(frozen=True)
class ThroughputPair:
    """Achieved (common, confidential) effective throughputs in bits/s/Hz."""

    c0: float
    c1: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.c0) and np.isfinite(self.c1)):
            raise ValueError(f"throughputs must be finite, got {self}")
        if self.c0 < 0 or self.c1 < 0:
            raise ValueError(f"throughputs must be nonnegative, got {self}")


@dataclass(frozen=True)
class PhiPair:
    """Fixed-point aggregates; both lie in (0, 1] for nonnegative rates."""

    phi0: float
    phi1: float

    def __post_init__(self) -> None:
        for v in (self.phi0, self.phi1):
            if not 0 < v <= 1 + 1e-12:
                raise ValueError(f"phi values must lie in (0, 1], got {self}")


def _aggregate_minus_one(rates: np.ndarray, weights: np.ndarray, beta: float) -> float:
    """E{2^(-beta r)} - 1, accurate for beta E{r} down to ~1e-16."""
    return float(weights @ np.expm1(-beta * LN2 * rates))


def effective_throughput(rates, grid: FadingGrid, qos: QosConfig) -> float:
    """Effective throughput of a per-state rate profile, bits/s/Hz."""
    r = np.asarray(rates, dtype=float)
    if r.shape != grid.weights.shape:
        raise ValueError("rates must align with the grid")
    beta = qos.beta
    return float(-np.log1p(_aggregate_minus_one(r, grid.weights, beta)) / (beta * LN2))


def throughput_of_profiles(r01: np.ndarray, r02: np.ndarray, r1: np.ndarray,
                           grid: FadingGrid, qos: QosConfig
                           ) -> tuple[float, float, float]:
    """(C01, C02, C1) of the three rate profiles under one QoS exponent."""
    return (effective_throughput(r01, grid, qos),
            effective_throughput(r02, grid, qos),
            effective_throughput(r1, grid, qos))


def phi_values_from_profiles(r01: np.ndarray, r02: np.ndarray, r1: np.ndarray,
                             weights: np.ndarray, beta: float, case: str,
                             delta: float | None) -> tuple[float, float]:
    """Raw (phi0, phi1) of precomputed rate profiles; see phi_functionals."""
    phi1 = min(1.0 + _aggregate_minus_one(r1, weights, beta), 1.0)
    if case == "I":
        phi0 = 1.0 + _aggregate_minus_one(r01, weights, beta)
    elif case == "II":
        phi0 = 1.0 + _aggregate_minus_one(r02, weights, beta)
    else:
        phi0 = (delta * (1.0 + _aggregate_minus_one(r01, weights, beta))
                + (1.0 - delta) * (1.0 + _aggregate_minus_one(r02, weights, beta)))
    return min(phi0, 1.0), phi1


def phi_functionals(policy: PowerPolicy, grid: FadingGrid, qos: QosConfig,
                    case: str, delta: float | None = None) -> PhiPair:
    """phi aggregates of a policy for the given stationarity case.

    phi0 is E{x0^(-beta)} of the common-rate SNR factor: receiver 1's factor
    for case I, receiver 2's for case II, and the delta-blend
    delta*phi0_I + (1-delta)*phi0_II for case III.  phi1 is
    E_Z{((1+mu1 z_M)/(1+gamma mu1 z_E))^(-beta)} + P(Z^c) in every case.
    """
    if case not in ("I", "II", "III"):
        raise ValueError(f"case must be 'I', 'II' or 'III', got {case!r}")
    if case == "III":
        if delta is None or not 0 <= delta <= 1:
            raise ValueError(f"case III needs delta in [0, 1], got {delta!r}")
    r01, r02, r1 = rate_profiles(grid, policy, qos.gamma)
    phi0, phi1 = phi_values_from_profiles(r01, r02, r1, grid.weights, qos.beta,
                                          case, delta)
    return PhiPair(phi0, phi1)
