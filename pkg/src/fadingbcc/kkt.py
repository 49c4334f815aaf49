"""Per-fading-state optimal power pairs given rescaled multiplier thresholds.

The outer solver hands down alpha1 = kappa phi0 ln2 / lambda0 and
alpha2 = kappa phi1 ln2 / lambda1 (an alpha becomes +inf when its lambda is
zero, which disables that power branch).  For each state the branch logic is:

  gate       mu1 can be positive only where z_M - gamma z_E > alpha2;
  mu0 == 0   when the confidential power solved under mu0 = 0 is already so
             large that the common stationarity admits no positive root;
  interior   both powers positive: mu0 is eliminated through its own
             stationarity equation and the remaining scalar equation in mu1
             is solved;
  mu1 == 0   common-only allocation (closed form for the single-gain systems,
             a scalar root for the blended case-III system).

Case I prices the common stream by the main-channel gain z_M, case II by the
eavesdropper-side gain gamma z_E, and case III by the delta-weighted blend of
both.  All scalar equations involved are strictly decreasing and convex (in
log form where noted), so clipped Newton iterations converge globally; the
blended interior system is closed with a bracketed secant on the mu1 residual.

Residuals are expressed in kappa-normalized units: a stationarity equation
divided through by kappa, minus one, so tolerances are dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericFailure
from .model import LN2, FadingSample
from .rates import PowerPair

_RES_TOL = 1e-13
_MAX_NEWTON = 200
_MU_CAP = 1e15


@dataclass(frozen=True)
class MultiplierSet:
    """Multipliers of one outer-solver state: price kappa, phi aggregates, weights."""

    kappa: float
    phi0: float
    phi1: float
    lambda0: float
    lambda1: float

    def __post_init__(self) -> None:
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        for name in ("phi0", "phi1"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.lambda0 < 0 or self.lambda1 < 0 or self.lambda0 + self.lambda1 <= 0:
            raise ValueError("boundary weights must be nonnegative with positive sum")

    @property
    def alpha1(self) -> float:
        if self.lambda0 == 0:
            return math.inf
        return self.kappa * self.phi0 * LN2 / self.lambda0

    @property
    def alpha2(self) -> float:
        if self.lambda1 == 0:
            return math.inf
        return self.kappa * self.phi1 * LN2 / self.lambda1


def _newton_decreasing_convex(f, x0: np.ndarray, context: str) -> np.ndarray:
    """Root of a strictly decreasing convex residual, elementwise.

    Tangent roots of a decreasing convex function never overshoot the true
    root from below, so clipped Newton converges monotonically from any start.
    """
    x = np.minimum(np.maximum(x0, 0.0), _MU_CAP)
    val, dv = f(x)
    for _ in range(_MAX_NEWTON):
        if np.all(np.abs(val) <= _RES_TOL):
            return x
        step = val / np.minimum(dv, -1e-300)
        x = np.minimum(np.maximum(x - step, 0.0), _MU_CAP)
        val, dv = f(x)
    bad = int(np.argmax(np.abs(val)))
    raise NumericFailure(f"state root solve did not converge ({context})",
                         residual=float(val[bad]), lane=bad, x=float(x[bad]))


def _ln_psi(mu1, zm, ze, beta, gamma, ln_dz):
    """ln of ((1+mu1 zM)/(1+g mu1 zE))^(-beta-1) * (zM - g zE) / (1+g mu1 zE)^2."""
    a = np.log1p(mu1 * zm)
    b = np.log1p(gamma * mu1 * ze)
    return -(beta + 1.0) * (a - b) + ln_dz - 2.0 * b


def _st(mu1, zm, ze, gamma):
    """Marginal common-rate slopes s = zM/(1+mu1 zM), t = g zE/(1+g mu1 zE)."""
    return zm / (1.0 + mu1 * zm), gamma * ze / (1.0 + gamma * mu1 * ze)


def _solve_mu1_zero_mu0(zm, ze, alpha2, beta, gamma, warm) -> np.ndarray:
    """Confidential power under mu0 = 0: root of ln psi(mu1) = ln alpha2."""
    ln_dz = np.log(zm - gamma * ze)
    ln_a2 = math.log(alpha2)

    def f(x):
        s, t = _st(x, zm, ze, gamma)
        val = _ln_psi(x, zm, ze, beta, gamma, ln_dz) - ln_a2
        return val, -(beta + 1.0) * (s - t) - 2.0 * t

    return _newton_decreasing_convex(f, warm, "confidential-only stationarity")


def _mu0_closed(z, alpha1, beta) -> np.ndarray:
    """Common-only allocation [ (z/alpha1)^(1/(beta+1)) - 1 ]^+ / z."""
    out = np.zeros_like(z)
    if math.isinf(alpha1):
        return out
    pos = z > 0
    zz = z[pos]
    out[pos] = np.maximum(np.expm1((np.log(zz) - math.log(alpha1)) / (beta + 1.0)) / zz, 0.0)
    return out


def _case12_interior(zm, ze, alpha1, alpha2, beta, gamma, main_channel, warm):
    """Interior (mu0, mu1) for cases I and II.

    The common stream is priced by z_M when main_channel is true (case I) and
    by gamma z_E otherwise (case II).  mu0 is eliminated via
    1 + mu0 * slope = (slope / alpha1)^(1/(beta+1)) with slope the current
    marginal of the common rate, leaving one decreasing convex equation in mu1.
    """
    ln_dz = np.log(zm - gamma * ze)
    ln_a2 = math.log(alpha2)
    ln_a1 = math.log(alpha1)
    gain = zm if main_channel else gamma * ze
    ln_g = np.log(gain)

    def f(x):
        s, t = _st(x, zm, ze, gamma)
        c = s if main_channel else t
        ln_slope = ln_g - np.log1p(x * gain)
        val = (_ln_psi(x, zm, ze, beta, gamma, ln_dz) - ln_a2
               - (ln_slope - ln_a1) / (beta + 1.0))
        dv = -(beta + 1.0) * (s - t) - 2.0 * t + c / (beta + 1.0)
        return val, dv

    mu1 = _newton_decreasing_convex(f, warm, "interior stationarity")
    s, t = _st(mu1, zm, ze, gamma)
    c = s if main_channel else t
    ln_slope = ln_g - np.log1p(mu1 * gain)
    mu0 = np.expm1((ln_slope - ln_a1) / (beta + 1.0)) / c
    return mu0, mu1


def solve_case1_states(zm, ze, alpha1, alpha2, beta, gamma, warm=None):
    """Vectorized case-I branch logic; returns (mu0, mu1) arrays."""
    zm = np.asarray(zm, dtype=float)
    ze = np.asarray(ze, dtype=float)
    mu0 = np.zeros_like(zm)
    mu1 = np.zeros_like(zm)
    warm_mu1 = warm[1] if warm is not None else np.zeros_like(zm)

    dz = zm - gamma * ze
    gate = dz > alpha2
    off = ~gate
    mu0[off] = _mu0_closed(zm[off], alpha1, beta)
    if not gate.any():
        return mu0, mu1

    idx = np.flatnonzero(gate)
    zmi, zei = zm[idx], ze[idx]
    cand = _solve_mu1_zero_mu0(zmi, zei, alpha2, beta, gamma, warm_mu1[idx])

    if math.isinf(alpha1):
        mu1[idx] = cand
        return mu0, mu1

    no_common = (cand > 1.0 / alpha1 - 1.0 / zmi) | (zmi < alpha1)
    mu1[idx[no_common]] = cand[no_common]

    rest = ~no_common
    if rest.any():
        j = idx[rest]
        zmj, zej = zm[j], ze[j]
        interior = ((zmj - gamma * zej) / alpha2
                    > np.exp(np.log(zmj / alpha1) / (beta + 1.0)))
        jj = j[interior]
        if jj.size:
            m0, m1 = _case12_interior(zm[jj], ze[jj], alpha1, alpha2, beta,
                                      gamma, True, warm_mu1[jj])
            neg = m0 < 0
            if neg.any():  # clamp and re-solve: mu0 = 0 leaves the cand root
                m0[neg] = 0.0
                m1[neg] = cand[rest][interior][neg]
            mu0[jj] = m0
            mu1[jj] = m1
        j0 = j[~interior]
        mu0[j0] = _mu0_closed(zm[j0], alpha1, beta)
    return mu0, mu1


def solve_case2_states(zm, ze, alpha1, alpha2, beta, gamma, warm=None):
    """Vectorized case-II branch logic (common stream priced by gamma z_E)."""
    zm = np.asarray(zm, dtype=float)
    ze = np.asarray(ze, dtype=float)
    mu0 = np.zeros_like(zm)
    mu1 = np.zeros_like(zm)
    warm_mu1 = warm[1] if warm is not None else np.zeros_like(zm)

    dz = zm - gamma * ze
    gate = dz > alpha2
    off = ~gate
    mu0[off] = _mu0_closed(gamma * ze[off], alpha1, beta)
    if not gate.any():
        return mu0, mu1

    idx = np.flatnonzero(gate)
    zmi, zei = zm[idx], ze[idx]
    cand = _solve_mu1_zero_mu0(zmi, zei, alpha2, beta, gamma, warm_mu1[idx])

    if math.isinf(alpha1):
        mu1[idx] = cand
        return mu0, mu1

    ge = gamma * zei
    with np.errstate(divide="ignore"):
        no_common = (cand > 1.0 / alpha1 - np.where(ge > 0, 1.0 / ge, np.inf)) | (ge < alpha1)
    mu1[idx[no_common]] = cand[no_common]

    rest = ~no_common
    if rest.any():
        j = idx[rest]
        gej = gamma * ze[j]
        interior = ((zm[j] - gej) / alpha2
                    > np.exp(np.log(gej / alpha1) / (beta + 1.0)))
        jj = j[interior]
        if jj.size:
            m0, m1 = _case12_interior(zm[jj], ze[jj], alpha1, alpha2, beta,
                                      gamma, False, warm_mu1[jj])
            neg = m0 < 0
            if neg.any():
                m0[neg] = 0.0
                m1[neg] = cand[rest][interior][neg]
            mu0[jj] = m0
            mu1[jj] = m1
        j0 = j[~interior]
        mu0[j0] = _mu0_closed(gamma * ze[j0], alpha1, beta)
    return mu0, mu1


def _case3_mu0_given_mu1(u, v, alpha1, beta, delta, warm):
    """Common power from the blended stationarity at fixed slopes u, v.

    Solves delta (1+mu0 u)^(-beta-1) u + (1-delta) (1+mu0 v)^(-beta-1) v = alpha1
    (decreasing convex in mu0); returns 0 where the zero-power value already
    falls below alpha1.
    """
    q0 = (delta * u + (1.0 - delta) * v) / alpha1 - 1.0
    mu0 = np.zeros_like(u)
    need = q0 > 0
    if not need.any():
        return mu0
    uu, vv = u[need], v[need]

    def f(x):
        au = np.exp((-beta - 1.0) * np.log1p(x * uu)) * uu
        av = np.exp((-beta - 1.0) * np.log1p(x * vv)) * vv
        val = (delta * au + (1.0 - delta) * av) / alpha1 - 1.0
        dau = np.exp((-beta - 2.0) * np.log1p(x * uu)) * uu * uu
        dav = np.exp((-beta - 2.0) * np.log1p(x * vv)) * vv * vv
        dv_ = -(beta + 1.0) * (delta * dau + (1.0 - delta) * dav) / alpha1
        return val, dv_

    mu0[need] = _newton_decreasing_convex(f, warm[need], "blended common stationarity")
    return mu0


def _case3_interior(zm, ze, alpha1, alpha2, beta, gamma, delta, cand, warm_mu0):
    """Interior solve for case III: bracketed secant on the mu1 residual.

    The residual F(mu1) = psi/alpha2 - 1 - (weighted interference term)/alpha1
    is >= 0 at mu1 = 0 (interior gate) and <= 0 at the mu0 = 0 candidate root
    (where psi/alpha2 = 1), so [0, cand] always brackets.
    """
    ln_dz = np.log(zm - gamma * ze)
    mu0_state = warm_mu0.copy()

    def F(x):
        nonlocal mu0_state
        u, v = _st(x, zm, ze, gamma)
        mu0_state = _case3_mu0_given_mu1(u, v, alpha1, beta, delta, mu0_state)
        au = np.exp((-beta - 1.0) * np.log1p(mu0_state * u)) * mu0_state * u * u
        av = np.exp((-beta - 1.0) * np.log1p(mu0_state * v)) * mu0_state * v * v
        psi = np.exp(_ln_psi(x, zm, ze, beta, gamma, ln_dz))
        return psi / alpha2 - 1.0 - (delta * au + (1.0 - delta) * av) / alpha1

    lo = np.zeros_like(zm)
    hi = cand.copy()
    flo = F(lo)
    fhi = F(hi)
    x = hi.copy()
    fx = fhi.copy()
    done = np.abs(fx) <= 1e-12
    for _ in range(200):
        if done.all():
            break
        denom = fhi - flo
        sec = np.where(np.abs(denom) > 0, (lo * fhi - hi * flo) / np.where(denom == 0, 1.0, denom),
                       0.5 * (lo + hi))
        mid = 0.5 * (lo + hi)
        inside = (sec > lo) & (sec < hi)
        x = np.where(done, x, np.where(inside, sec, mid))
        fx_new = F(x)
        fx = np.where(done, fx, fx_new)
        upd = ~done
        pos = upd & (fx > 0)
        neg = upd & (fx <= 0)
        # Illinois damping on the retained endpoint keeps the secant honest.
        flo = np.where(pos, fx, np.where(neg, 0.5 * flo, flo))
        lo = np.where(pos, x, lo)
        fhi = np.where(neg, fx, np.where(pos, 0.5 * fhi, fhi))
        hi = np.where(neg, x, hi)
        done = done | (np.abs(fx) <= 1e-12) | ((hi - lo) <= 1e-15 * np.maximum(hi, 1.0))
    else:
        bad = int(np.argmax(np.abs(fx)))
        raise NumericFailure("case III interior solve did not converge",
                             residual=float(fx[bad]), lane=bad)
    u, v = _st(x, zm, ze, gamma)
    mu0 = _case3_mu0_given_mu1(u, v, alpha1, beta, delta, mu0_state)
    return mu0, x


def solve_case3_states(zm, ze, alpha1, alpha2, beta, gamma, delta, warm=None):
    """Vectorized case-III branch logic for a blend weight delta in [0, 1]."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if delta == 1.0:  # the blended system degenerates exactly to case I
        return solve_case1_states(zm, ze, alpha1, alpha2, beta, gamma, warm)
    if delta == 0.0:
        return solve_case2_states(zm, ze, alpha1, alpha2, beta, gamma, warm)

    zm = np.asarray(zm, dtype=float)
    ze = np.asarray(ze, dtype=float)
    mu0 = np.zeros_like(zm)
    mu1 = np.zeros_like(zm)
    warm_mu0 = warm[0] if warm is not None else np.zeros_like(zm)
    warm_mu1 = warm[1] if warm is not None else np.zeros_like(zm)

    dz = zm - gamma * ze
    gate = dz > alpha2
    off = ~gate
    if off.any() and not math.isinf(alpha1):
        mu0[off] = _case3_mu0_given_mu1(zm[off], gamma * ze[off], alpha1, beta,
                                        delta, warm_mu0[off])
    if not gate.any():
        return mu0, mu1

    idx = np.flatnonzero(gate)
    zmi, zei = zm[idx], ze[idx]
    cand = _solve_mu1_zero_mu0(zmi, zei, alpha2, beta, gamma, warm_mu1[idx])

    if math.isinf(alpha1):
        mu1[idx] = cand
        return mu0, mu1

    sc, tc = _st(cand, zmi, zei, gamma)
    no_common = ((delta * sc + (1.0 - delta) * tc <= alpha1)
                 | (delta * zmi + (1.0 - delta) * gamma * zei < alpha1))
    mu1[idx[no_common]] = cand[no_common]

    rest = ~no_common
    if rest.any():
        j = idx[rest]
        zmj, zej = zm[j], ze[j]
        # mu1 = 0 candidate for the interior gate test
        mu0_at0 = _case3_mu0_given_mu1(zmj, gamma * zej, alpha1, beta, delta,
                                       warm_mu0[j])
        au = np.exp((-beta - 1.0) * np.log1p(mu0_at0 * zmj)) * mu0_at0 * zmj * zmj
        av = (np.exp((-beta - 1.0) * np.log1p(mu0_at0 * gamma * zej))
              * mu0_at0 * (gamma * zej) ** 2)
        grow = ((zmj - gamma * zej) / alpha2 - 1.0
                - (delta * au + (1.0 - delta) * av) / alpha1)
        interior = grow >= 0
        jj = j[interior]
        if jj.size:
            m0, m1 = _case3_interior(zm[jj], ze[jj], alpha1, alpha2, beta,
                                     gamma, delta, cand[rest][interior],
                                     mu0_at0[interior])
            mu0[jj] = m0
            mu1[jj] = m1
        j0 = j[~interior]
        mu0[j0] = mu0_at0[~interior]
    return mu0, mu1


def solve_states(zm, ze, alpha1, alpha2, beta, gamma, case: str,
                 delta: float | None = None, warm=None):
    """Dispatch to the per-case vectorized solver."""
    if case == "I":
        return solve_case1_states(zm, ze, alpha1, alpha2, beta, gamma, warm)
    if case == "II":
        return solve_case2_states(zm, ze, alpha1, alpha2, beta, gamma, warm)
    if case == "III":
        if delta is None:
            raise ValueError("case III requires delta")
        return solve_case3_states(zm, ze, alpha1, alpha2, beta, gamma, delta, warm)
    raise ValueError(f"unknown case {case!r}")


def _as_pair(mu0: np.ndarray, mu1: np.ndarray) -> PowerPair:
    return PowerPair(float(mu0[0]), float(mu1[0]))


def solve_state_case1(s: FadingSample, m: MultiplierSet, beta: float,
                      gamma: float) -> PowerPair:
    """Case-I optimal (mu0, mu1) for a single fading state."""
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    zm, ze = np.array([s.z_M]), np.array([s.z_E])
    return _as_pair(*solve_case1_states(zm, ze, m.alpha1, m.alpha2, beta, gamma))


def solve_state_case2(s: FadingSample, m: MultiplierSet, beta: float,
                      gamma: float) -> PowerPair:
    """Case-II optimal (mu0, mu1) for a single fading state."""
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    zm, ze = np.array([s.z_M]), np.array([s.z_E])
    return _as_pair(*solve_case2_states(zm, ze, m.alpha1, m.alpha2, beta, gamma))


def solve_state_case3(s: FadingSample, m: MultiplierSet, delta: float,
                      beta: float, gamma: float) -> PowerPair:
    """Case-III optimal (mu0, mu1) for a single fading state and blend delta."""
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    zm, ze = np.array([s.z_M]), np.array([s.z_E])
    return _as_pair(*solve_case3_states(zm, ze, m.alpha1, m.alpha2, beta, gamma, delta))


def stationarity_residuals(zm, ze, mu0, mu1, alpha1, alpha2, beta, gamma,
                           case: str, delta: float | None = None):
    """Kappa-normalized residuals (res_mu0, res_mu1) of the case's equations.

    res_mu0 is meaningful where mu0 > 0 and res_mu1 where mu1 > 0; both are
    exactly the stationarity equations divided by kappa, minus one.
    """
    zm = np.asarray(zm, dtype=float)
    ze = np.asarray(ze, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    if case == "III" and delta is None:
        raise ValueError("case III requires delta")
    d = {"I": 1.0, "II": 0.0}.get(case, delta)
    s, t = _st(mu1, zm, ze, gamma)
    au = np.exp((-beta - 1.0) * np.log1p(mu0 * s)) * s
    av = np.exp((-beta - 1.0) * np.log1p(mu0 * t)) * t
    inv_a1 = 0.0 if math.isinf(alpha1) else 1.0 / alpha1
    res0 = (d * au + (1.0 - d) * av) * inv_a1 - 1.0
    dz = zm - gamma * ze
    with np.errstate(invalid="ignore", divide="ignore"):
        ln_dz = np.where(dz > 0, np.log(np.where(dz > 0, dz, 1.0)), -np.inf)
        psi = np.exp(_ln_psi(mu1, zm, ze, beta, gamma, ln_dz))
    inv_a2 = 0.0 if math.isinf(alpha2) else 1.0 / alpha2
    res1 = (psi * inv_a2 - 1.0
            - (d * au * mu0 * s + (1.0 - d) * av * mu0 * t) * inv_a1)
    return res0, res1


def lagrangian_integrand(zm, ze, mu0, mu1, m: MultiplierSet, beta, gamma,
                         case: str, delta: float | None = None):
    """Per-state objective the stationarity systems maximize, normalized units.

    f = -(lambda0/(phi0 beta ln2)) x0^(-beta) - (lambda1/(phi1 beta ln2)) x1^(-beta)
        - kappa (mu0 + mu1),
    with x0 the case's common-rate SNR factor (delta-blend for case III) and
    the confidential factor only on the secure set.
    """
    zm = np.asarray(zm, dtype=float)
    ze = np.asarray(ze, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    if case == "III" and delta is None:
        raise ValueError("case III requires delta")
    d = {"I": 1.0, "II": 0.0}.get(case, delta)
    secure = zm > gamma * ze
    s, t = _st(mu1, zm, ze, gamma)
    x0m = np.exp(-beta * np.log1p(mu0 * s))
    x0e = np.exp(-beta * np.log1p(mu0 * t))
    x1 = np.where(secure,
                  np.exp(-beta * (np.log1p(mu1 * zm) - np.log1p(gamma * mu1 * ze))),
                  1.0)
    c0 = m.lambda0 / (m.phi0 * beta * LN2)
    c1 = m.lambda1 / (m.phi1 * beta * LN2)
    return (-c0 * (d * x0m + (1.0 - d) * x0e) - c1 * x1
            - m.kappa * (mu0 + np.where(secure, mu1, 0.0)))
