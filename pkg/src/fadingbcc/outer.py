"""Multiplier resolution, case selection, and the time-sharing search.

solve_case resolves (kappa, phi0, phi1) for one stationarity system: an outer
bisection on the power price kappa drives the consumed average power to the
budget, and at each kappa a damped fixed-point iteration settles the phi
aggregates that the per-state solutions depend on.

master_pc runs the case-selection ladder: accept the case-I solution when
receiver 1 is the common-rate bottleneck (R01 < R02), the case-II solution on
the mirrored condition, and otherwise search the blend weight delta for the
boundary regime where both receivers support the same common throughput
(C01 = C02).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kkt
from .effcap import (ThroughputPair, phi_values_from_profiles,
                     throughput_of_profiles)
from .errors import NumericFailure
from .model import LN2, FadingGrid, QosConfig
from .rates import PowerPolicy, profiles_from_arrays, rate_profiles

CASE_TAGS = ("I", "II", "IIIA", "IIIB", "IIIC")


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and iteration caps for the outer loops."""

    tol_power: float = 1e-6        # relative power mismatch at convergence
    tol_phi: float = 1e-8          # componentwise fixed-point residual
    phi_damping: float = 0.5
    phi_max_iter: int = 500
    kappa_max_iter: int = 300
    case_tol: float = 1e-6         # R01 vs R02 equality tolerance
    throughput_tol: float = 1e-7   # C01 vs C02 equality tolerance
    delta_scan: int = 33
    delta_max_iter: int = 80
    trace_hook: Callable[[dict], None] | None = None


@dataclass
class SolveReport:
    """One converged boundary-point solve with its diagnostics."""

    policy: PowerPolicy
    multipliers: kkt.MultiplierSet
    case: str
    delta: float | None
    iterations: dict
    power_used: float
    residuals: dict
    r01: float
    r02: float
    c01: float
    c02: float
    c1: float
    c0: float
    objective: float
    degenerate: bool = False

    @property
    def throughput(self) -> ThroughputPair:
        return ThroughputPair(max(self.c0, 0.0), max(self.c1, 0.0))


@dataclass
class _Warm:
    kappa: float | None = None
    phi: tuple[float, float] = (1.0, 1.0)
    policy: tuple[np.ndarray, np.ndarray] | None = None


def _normalize_lambda(lam) -> tuple[float, float]:
    l0, l1 = float(lam[0]), float(lam[1])
    if l0 < 0 or l1 < 0 or l0 + l1 <= 0:
        raise ValueError(f"lambda weights must be nonnegative with positive sum, got {lam}")
    return l0 / (l0 + l1), l1 / (l0 + l1)


def _alphas(kappa, phi0, phi1, lam0, lam1):
    a1 = math.inf if lam0 == 0 else kappa * phi0 * LN2 / lam0
    a2 = math.inf if lam1 == 0 else kappa * phi1 * LN2 / lam1
    return a1, a2


def _relequal(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


class _CaseSolver:
    """Fixed-point machinery for one (grid, qos, lambda, case, delta) instance."""

    def __init__(self, grid, qos, lam0, lam1, case, delta, opt, warm: _Warm):
        self.grid = grid
        self.qos = qos
        self.lam0 = lam0
        self.lam1 = lam1
        self.case = case
        self.delta = delta
        self.opt = opt
        self.phi = warm.phi
        self.policy_warm = warm.policy
        self.secure = grid.secure_mask(qos.gamma)
        self.phi_iters = 0
        self.kappa_evals = 0
        self.phi_residual = math.nan
        self._phi_track: list[tuple[float, float, float]] = []  # (ln k, phi0, phi1)

    def _solve_states(self, kappa, phi0, phi1):
        a1, a2 = _alphas(kappa, phi0, phi1, self.lam0, self.lam1)
        mu0, mu1 = kkt.solve_states(self.grid.z_m, self.grid.z_e, a1, a2,
                                    self.qos.beta, self.qos.gamma, self.case,
                                    self.delta, warm=self.policy_warm)
        self.policy_warm = (mu0, mu1)
        return mu0, mu1

    def _phi_of(self, mu0, mu1) -> tuple[float, float]:
        r01, r02, r1 = profiles_from_arrays(self.grid.z_m, self.grid.z_e,
                                            self.secure, mu0, mu1, self.qos.gamma)
        return phi_values_from_profiles(r01, r02, r1, self.grid.weights,
                                        self.qos.beta, self.case, self.delta)

    def _phi_start(self, kappa) -> tuple[float, float]:
        """Warm phi guess: extrapolate the converged track linearly in ln kappa."""
        if not self._phi_track:
            return self.phi
        lk = math.log(kappa)
        if len(self._phi_track) == 1:
            _, p0, p1 = self._phi_track[-1]
            return p0, p1
        (ka, a0, a1), (kb, b0, b1) = self._phi_track[-2], self._phi_track[-1]
        if ka == kb:
            return b0, b1
        f = (lk - kb) / (ka - kb)
        clip = lambda v: min(max(v, 1e-12), 1.0)
        return clip(b0 + f * (a0 - b0)), clip(b1 + f * (a1 - b1))

    def settle_phi(self, kappa, tol) -> tuple[tuple[np.ndarray, np.ndarray], float]:
        """Damped fixed point on (phi0, phi1) at a fixed power price."""
        opt = self.opt
        phi0, phi1 = self._phi_start(kappa)
        for _ in range(opt.phi_max_iter):
            mu0, mu1 = self._solve_states(kappa, phi0, phi1)
            n0, n1 = self._phi_of(mu0, mu1)
            res = max(abs(n0 - phi0), abs(n1 - phi1))
            self.phi_iters += 1
            if res <= tol:
                self.phi = (phi0, phi1)
                self.phi_residual = res
                self._phi_track.append((math.log(kappa), phi0, phi1))
                del self._phi_track[:-2]
                return (mu0, mu1), float(self.grid.weights @ (mu0 + mu1))
            phi0 += opt.phi_damping * (n0 - phi0)
            phi1 += opt.phi_damping * (n1 - phi1)
        raise NumericFailure("phi fixed point did not converge",
                             case=self.case, delta=self.delta, kappa=kappa,
                             residual=res, iterations=opt.phi_max_iter)

    def power_at(self, kappa, tol=None) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
        policy, power = self.settle_phi(kappa, tol or self.opt.tol_phi)
        self.kappa_evals += 1
        if self.opt.trace_hook is not None:
            self.opt.trace_hook({
                "iteration": self.kappa_evals, "kappa": kappa,
                "phi0": self.phi[0], "phi1": self.phi[1],
                "power_gap": power - self.qos.snr,
            })
        return power, policy


def _zero_report(grid, qos, lam0, lam1, case, delta, degenerate=False) -> SolveReport:
    policy = PowerPolicy.zero(len(grid))
    mult = kkt.MultiplierSet(1.0, 1.0, 1.0, lam0, lam1)
    return SolveReport(
        policy=policy, multipliers=mult, case=case, delta=delta,
        iterations={"kappa": 0, "phi": 0},
        power_used=0.0, residuals={"phi": 0.0, "power": qos.snr},
        r01=0.0, r02=0.0, c01=0.0, c02=0.0, c1=0.0, c0=0.0, objective=0.0,
        degenerate=degenerate,
    )


def _finish_report(grid, qos, lam0, lam1, case, delta, policy, kappa, phi,
                   power, solver) -> SolveReport:
    gamma = qos.gamma
    r01p, r02p, r1p = rate_profiles(grid, policy, gamma)
    w = grid.weights
    r01, r02 = float(w @ r01p), float(w @ r02p)
    c01, c02, c1 = throughput_of_profiles(r01p, r02p, r1p, grid, qos)
    if case == "I":
        c0 = c01
    elif case == "II":
        c0 = c02
    else:
        c0 = delta * c01 + (1.0 - delta) * c02
    mult = kkt.MultiplierSet(kappa, phi[0], phi[1], lam0, lam1)
    return SolveReport(
        policy=policy, multipliers=mult, case=case, delta=delta,
        iterations={"kappa": solver.kappa_evals, "phi": solver.phi_iters},
        power_used=power,
        residuals={"phi": solver.phi_residual, "power": abs(power - qos.snr)},
        r01=r01, r02=r02, c01=c01, c02=c02, c1=c1, c0=c0,
        objective=lam0 * c0 + lam1 * c1,
    )


def solve_case(grid: FadingGrid, qos: QosConfig, lam, case: str,
               delta: float | None = None,
               options: SolverOptions | None = None,
               warm: _Warm | None = None) -> SolveReport:
    """Resolve multipliers for one case so the power budget binds.

    Returns the per-state policy at the converged (kappa, phi0, phi1), with
    the phi fixed-point residual below tol_phi and the consumed power within
    tol_power (relative) of the budget.
    """
    opt = options or SolverOptions()
    lam0, lam1 = _normalize_lambda(lam)
    if case not in ("I", "II", "III"):
        raise ValueError(f"case must be 'I', 'II' or 'III', got {case!r}")
    if case == "III" and (delta is None or not 0 <= delta <= 1):
        raise ValueError(f"case III needs delta in [0, 1], got {delta!r}")
    if case != "III":
        delta = None
    snr = qos.snr
    if snr == 0:
        return _zero_report(grid, qos, lam0, lam1, case, delta)

    solver = _CaseSolver(grid, qos, lam0, lam1, case, delta, opt,
                         warm or _Warm())
    tol = opt.tol_power * snr
    # Phase 1 localizes kappa with loosely settled phi (cheap); phase 2 redoes
    # the bracket and bisection entirely at the contractual phi tolerance so
    # every comparison is self-consistent.
    loose = max(opt.tol_phi, 1e-5)

    # Bracket the price: power decreases in kappa.
    if warm is not None and warm.kappa is not None:
        lo = warm.kappa / 1.6
        hi = warm.kappa * 1.6
    else:
        lo, hi = 1e-8, 1.0
    p_lo, _ = solver.power_at(lo, loose)
    while p_lo < snr - tol:
        if p_lo == 0.0 and lo < 1e-250:
            # Nothing can consume power (e.g. confidential-only weight with an
            # empty secure set): the zero policy is optimal.
            return _zero_report(grid, qos, lam0, lam1, case, delta, degenerate=True)
        lo /= 16.0
        if lo < 1e-280:
            raise NumericFailure("power budget unreachable as kappa -> 0",
                                 case=case, delta=delta, power=p_lo, snr=snr)
        p_lo, _ = solver.power_at(lo, loose)
    hi = max(hi, lo * 2.0)
    p_hi, _ = solver.power_at(hi, loose)
    while p_hi > snr + tol:
        hi *= 8.0
        if hi > 1e120:
            raise NumericFailure("power budget unreachable as kappa -> inf",
                                 case=case, delta=delta, power=p_hi, snr=snr)
        p_hi, _ = solver.power_at(hi, loose)
    while hi / lo > 1.004:
        mid = math.sqrt(lo * hi)
        p_mid, _ = solver.power_at(mid, loose)
        if p_mid > snr:
            lo = mid
        else:
            hi = mid

    # Phase 2: tight phi settling throughout.
    lo /= 1.02
    hi *= 1.02
    p_lo, pol_lo = solver.power_at(lo, opt.tol_phi)
    while p_lo < snr - tol:
        lo /= 2.0
        if lo < 1e-280:
            raise NumericFailure("power budget unreachable as kappa -> 0",
                                 case=case, delta=delta, power=p_lo, snr=snr)
        p_lo, pol_lo = solver.power_at(lo, opt.tol_phi)
    if abs(p_lo - snr) <= tol:
        return _finish_report(grid, qos, lam0, lam1, case, delta,
                              PowerPolicy(*pol_lo), lo, solver.phi, p_lo, solver)
    p_hi, pol_hi = solver.power_at(hi, opt.tol_phi)
    while p_hi > snr + tol:
        hi *= 2.0
        if hi > 1e120:
            raise NumericFailure("power budget unreachable as kappa -> inf",
                                 case=case, delta=delta, power=p_hi, snr=snr)
        p_hi, pol_hi = solver.power_at(hi, opt.tol_phi)
    if abs(p_hi - snr) <= tol:
        return _finish_report(grid, qos, lam0, lam1, case, delta,
                              PowerPolicy(*pol_hi), hi, solver.phi, p_hi, solver)
    for _ in range(opt.kappa_max_iter):
        mid = math.sqrt(lo * hi) if hi / lo > 4.0 else 0.5 * (lo + hi)
        p_mid, pol_mid = solver.power_at(mid, opt.tol_phi)
        if abs(p_mid - snr) <= tol:
            return _finish_report(grid, qos, lam0, lam1, case, delta,
                                  PowerPolicy(*pol_mid), mid, solver.phi,
                                  p_mid, solver)
        if p_mid > snr:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            raise NumericFailure("power step exceeds tolerance at the price root",
                                 case=case, delta=delta, kappa=hi,
                                 power_gap=p_mid - snr, snr=snr)
    raise NumericFailure("kappa bisection did not reach the power budget",
                         case=case, delta=delta, lo=lo, hi=hi, snr=snr)


def verify_case_condition(report: SolveReport, options: SolverOptions | None = None
                          ) -> tuple[bool, str]:
    """Re-check the condition attached to the report's case tag."""
    opt = options or SolverOptions()
    tol, ctol = opt.case_tol, opt.throughput_tol
    r01, r02, c01, c02 = report.r01, report.r02, report.c01, report.c02
    tag = report.case
    if tag == "I":
        ok = r02 - r01 > tol * max(1.0, abs(r01), abs(r02))
        return ok, f"R01={r01:.9g} < R02={r02:.9g}"
    if tag == "II":
        ok = r01 - r02 > tol * max(1.0, abs(r01), abs(r02))
        return ok, f"R01={r01:.9g} > R02={r02:.9g}"
    if tag == "IIIA":
        ok = _relequal(r01, r02, tol) and c01 > c02
        return ok, f"R01~R02, C01={c01:.9g} > C02={c02:.9g}"
    if tag == "IIIB":
        ok = _relequal(r01, r02, tol) and c02 > c01
        return ok, f"R01~R02, C02={c02:.9g} > C01={c01:.9g}"
    if tag == "IIIC":
        ok = abs(r01 - r02) < opt.case_tol and abs(c01 - c02) < ctol
        return ok, f"|R01-R02|={abs(r01 - r02):.3g}, |C01-C02|={abs(c01 - c02):.3g}"
    return False, f"unknown tag {tag!r}"


def _warm_from(report: SolveReport | None) -> _Warm:
    if report is None:
        return _Warm()
    m = report.multipliers
    return _Warm(kappa=m.kappa, phi=(m.phi0, m.phi1),
                 policy=(report.policy.mu0, report.policy.mu1))


def master_pc(grid: FadingGrid, qos: QosConfig, lam,
              options: SolverOptions | None = None) -> SolveReport:
    """Case-selection ladder over the three stationarity systems."""
    opt = options or SolverOptions()
    lam0, lam1 = _normalize_lambda(lam)
    lam = (lam0, lam1)
    if qos.snr == 0:
        return _zero_report(grid, qos, lam0, lam1, "I", None)

    rep1 = solve_case(grid, qos, lam, "I", options=opt)
    tol = opt.case_tol
    ctol = opt.throughput_tol
    scale = max(1.0, abs(rep1.r01), abs(rep1.r02))
    if rep1.r02 - rep1.r01 > tol * scale:
        rep1.case = "I"
        return rep1
    if _relequal(rep1.r01, rep1.r02, tol):
        if rep1.c01 - rep1.c02 > ctol:
            rep1.case = "IIIA"
            return rep1
        if abs(rep1.c01 - rep1.c02) <= ctol:
            # Fully degenerate tie (no effective common message): any blend
            # weight is optimal; report delta = 0.
            rep1.case = "IIIC"
            rep1.delta = 0.0
            rep1.degenerate = True
            return rep1

    rep2 = solve_case(grid, qos, lam, "II", options=opt, warm=_warm_from(rep1))
    scale = max(1.0, abs(rep2.r01), abs(rep2.r02))
    if rep2.r01 - rep2.r02 > tol * scale:
        rep2.case = "II"
        return rep2
    if _relequal(rep2.r01, rep2.r02, tol):
        if rep2.c02 - rep2.c01 > ctol:
            rep2.case = "IIIB"
            return rep2
        if abs(rep2.c01 - rep2.c02) <= ctol:
            rep2.case = "IIIC"
            rep2.delta = 0.0
            rep2.degenerate = True
            return rep2

    _, report = delta_search(grid, qos, lam, options=opt,
                             case1_report=rep1, case2_report=rep2)
    return report


def delta_search(grid: FadingGrid, qos: QosConfig, lam,
                 options: SolverOptions | None = None,
                 case1_report: SolveReport | None = None,
                 case2_report: SolveReport | None = None
                 ) -> tuple[float, SolveReport]:
    """Find the blend weight equalizing the two common throughputs.

    Scans delta over a uniform grid for a sign change of C01 - C02, then
    refines with a damped secant (Illinois) until |C01 - C02| < throughput_tol.
    """
    opt = options or SolverOptions()
    lam0, lam1 = _normalize_lambda(lam)
    lam = (lam0, lam1)

    def gap(rep: SolveReport) -> float:
        return rep.c01 - rep.c02

    def solve_at(delta: float, warm: _Warm) -> SolveReport:
        rep = solve_case(grid, qos, lam, "III", delta=delta, options=opt,
                         warm=warm)
        rep.case = "IIIC"
        return rep

    def finalize(rep: SolveReport, evals: int) -> tuple[float, SolveReport]:
        rep.iterations["delta"] = evals
        rep.residuals["case_c_gap"] = abs(rep.c01 - rep.c02)
        rep.residuals["case_r_gap"] = abs(rep.r01 - rep.r02)
        return rep.delta, rep

    deltas = np.linspace(0.0, 1.0, opt.delta_scan)
    scanned: list[tuple[float, float]] = []
    prev_rep = None
    prev_g = None
    evals = 0
    warm = _warm_from(case2_report or case1_report)
    for d in deltas:
        if d == 0.0 and case2_report is not None:
            rep = case2_report
            rep = _copy_as_delta(rep, 0.0)
        elif d == 1.0 and case1_report is not None:
            rep = _copy_as_delta(case1_report, 1.0)
        else:
            rep = solve_at(float(d), warm)
            evals += 1
        warm = _warm_from(rep)
        g = gap(rep)
        scanned.append((float(d), g))
        if abs(g) <= opt.throughput_tol:
            return finalize(rep, evals)
        if prev_g is not None and (g < 0) != (prev_g < 0):
            lo_d, lo_rep, lo_g = scanned[-2][0], prev_rep, prev_g
            hi_d, hi_rep, hi_g = float(d), rep, g
            break
        prev_rep, prev_g = rep, g
    else:
        raise NumericFailure("no sign change of C01 - C02 over the delta scan",
                             scanned=scanned)

    # Illinois refinement on the bracketing interval.
    for _ in range(opt.delta_max_iter):
        denom = hi_g - lo_g
        d = (lo_d * hi_g - hi_d * lo_g) / denom if denom != 0 else 0.5 * (lo_d + hi_d)
        if not lo_d < d < hi_d:
            d = 0.5 * (lo_d + hi_d)
        rep = solve_at(d, _warm_from(lo_rep))
        evals += 1
        g = gap(rep)
        if abs(g) <= opt.throughput_tol:
            return finalize(rep, evals)
        if (g < 0) == (hi_g < 0):
            hi_d, hi_rep, hi_g = d, rep, g
            lo_g *= 0.5
        else:
            lo_d, lo_rep, lo_g = d, rep, g
            hi_g *= 0.5
    raise NumericFailure("delta refinement did not converge",
                         bracket=(lo_d, hi_d), gaps=(lo_g, hi_g),
                         scanned=scanned)


def _copy_as_delta(rep: SolveReport, delta: float) -> SolveReport:
    out = SolveReport(
        policy=rep.policy, multipliers=rep.multipliers, case="IIIC",
        delta=delta, iterations=dict(rep.iterations), power_used=rep.power_used,
        residuals=dict(rep.residuals), r01=rep.r01, r02=rep.r02,
        c01=rep.c01, c02=rep.c02, c1=rep.c1,
        c0=delta * rep.c01 + (1.0 - delta) * rep.c02, objective=rep.objective,
    )
    out.objective = rep.multipliers.lambda0 * out.c0 + rep.multipliers.lambda1 * out.c1
    return out
