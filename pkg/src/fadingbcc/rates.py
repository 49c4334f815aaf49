"""Instantaneous per-state rates for confidential and common messages.

All rates are in bits/s/Hz.  On the secure set Z the confidential stream gets
SNR mu1 and the common stream mu0 on top of it; outside Z only the common
stream is transmitted (mu1 must be 0 there).

r1  = log2((1 + mu1 z_M) / (1 + gamma mu1 z_E))          on Z, else 0
r01 = log2(1 + mu0 z_M / (1 + mu1 z_M))                  on Z
      log2(1 + mu0 z_M)                                  on Z^c
r02 = log2(1 + gamma mu0 z_E / (1 + gamma mu1 z_E))      on Z
      log2(1 + gamma mu0 z_E)                            on Z^c

r01 and r02 are the two candidate common-message rates (receiver 1 and
receiver 2 limited); which one binds is decided at the ergodic level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LN2, FadingGrid, FadingSample, in_secure_set


@dataclass(frozen=True)
class PowerPair:
    """Per-state SNR allocation: mu0 for the common, mu1 for the confidential stream."""

    mu0: float
    mu1: float

    def __post_init__(self) -> None:
        if self.mu0 < 0 or self.mu1 < 0:
            raise ValueError(f"power allocations must be nonnegative, got {self}")


@dataclass(frozen=True)
class PowerPolicy:
    """Per-grid-state power pairs, aligned with a FadingGrid by position."""

    mu0: np.ndarray
    mu1: np.ndarray

    def __post_init__(self) -> None:
        mu0 = np.asarray(self.mu0, dtype=float)
        mu1 = np.asarray(self.mu1, dtype=float)
        if mu0.shape != mu1.shape or mu0.ndim != 1:
            raise ValueError("mu0 and mu1 must be equal-length 1-D arrays")
        if np.any(mu0 < 0) or np.any(mu1 < 0):
            raise ValueError("power allocations must be nonnegative")
        for arr, name in ((mu0, "mu0"), (mu1, "mu1")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.mu0.size

    def pair(self, i: int) -> PowerPair:
        return PowerPair(float(self.mu0[i]), float(self.mu1[i]))

    @staticmethod
    def zero(n: int) -> "PowerPolicy":
        return PowerPolicy(np.zeros(n), np.zeros(n))


def validate_policy(policy: PowerPolicy, grid: FadingGrid, gamma: float,
                    snr: float | None = None) -> None:
    """Check Z^c support and, when snr is given, average-power feasibility."""
    if len(policy) != len(grid):
        raise ValueError(f"policy length {len(policy)} != grid length {len(grid)}")
    insecure = ~grid.secure_mask(gamma)
    if np.any(policy.mu1[insecure] > 0):
        raise ValueError("mu1 must be 0 outside the secure set Z")
    if snr is not None:
        used = average_power(policy, grid)
        if used > snr + 1e-9:
            raise ValueError(f"average power {used} exceeds constraint {snr}")


def average_power(policy: PowerPolicy, grid: FadingGrid) -> float:
    """E{mu0 + mu1}; mu1 is zero outside Z so no region split is needed."""
    return float(grid.weights @ (policy.mu0 + policy.mu1))


def _check_pair(s: FadingSample, p: PowerPair, gamma: float) -> bool:
    secure = in_secure_set(s, gamma)
    if not secure and p.mu1 != 0:
        raise ValueError("mu1 must be 0 for states outside the secure set")
    return secure


def rate_r1(s: FadingSample, p: PowerPair, gamma: float) -> float:
    """Confidential-message rate of one state."""
    if not _check_pair(s, p, gamma):
        return 0.0
    return float((np.log1p(p.mu1 * s.z_M) - np.log1p(gamma * p.mu1 * s.z_E)) / LN2)


def rate_r01(s: FadingSample, p: PowerPair, gamma: float) -> float:
    """Common-message rate seen by receiver 1."""
    if _check_pair(s, p, gamma):
        return float(np.log1p(p.mu0 * s.z_M / (1.0 + p.mu1 * s.z_M)) / LN2)
    return float(np.log1p(p.mu0 * s.z_M) / LN2)


def rate_r02(s: FadingSample, p: PowerPair, gamma: float) -> float:
    """Common-message rate seen by receiver 2."""
    if _check_pair(s, p, gamma):
        return float(np.log1p(gamma * p.mu0 * s.z_E / (1.0 + gamma * p.mu1 * s.z_E)) / LN2)
    return float(np.log1p(gamma * p.mu0 * s.z_E) / LN2)


def profiles_from_arrays(zm: np.ndarray, ze: np.ndarray, secure: np.ndarray,
                         mu0: np.ndarray, mu1: np.ndarray, gamma: float
                         ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw-array (r01, r02, r1) profiles; assumes mu1 == 0 off the secure set."""
    r01 = np.log1p(mu0 * zm / (1.0 + mu1 * zm)) / LN2
    r02 = np.log1p(gamma * mu0 * ze / (1.0 + gamma * mu1 * ze)) / LN2
    r1 = np.where(secure, (np.log1p(mu1 * zm) - np.log1p(gamma * mu1 * ze)) / LN2, 0.0)
    return r01, r02, r1


def rate_profiles(grid: FadingGrid, policy: PowerPolicy, gamma: float
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (r01, r02, r1) profiles over all grid states."""
    if len(policy) != len(grid):
        raise ValueError(f"policy length {len(policy)} != grid length {len(grid)}")
    return profiles_from_arrays(grid.z_m, grid.z_e, grid.secure_mask(gamma),
                                policy.mu0, policy.mu1, gamma)


def ergodic_rates(grid: FadingGrid, policy: PowerPolicy, gamma: float
                  ) -> tuple[float, float, float]:
    """Weighted means (R01_bar, R02_bar, R1_bar) of the per-state rates."""
    r01, r02, r1 = rate_profiles(grid, policy, gamma)
    w = grid.weights
    return float(w @ r01), float(w @ r02), float(w @ r1)
