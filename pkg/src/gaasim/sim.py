"""Deterministic co-simulation of the interconnected concrete/abstract pair
under a piecewise abstract input policy, with jump-event handling and
trajectory-level verification.

The joint state z = [x; xhat] evolves under classical fixed-step RK4.  For
each control regime (an open-loop polynomial segment or a feedback region)
the right-hand side is affine, so the RK4 step is applied through its exact
per-regime step matrices; this is algebraically identical to stage-wise
evaluation and keeps long horizons fast.  Open-loop breakpoints are inserted
into the grid exactly; feedback region crossings are located by bisection
and the enclosing step is split.  The grid sample at a jump time stores the
right limit of the abstract input.

A single run is strictly sequential; distinct runs share no mutable state
and may execute in parallel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import refine
from .model import (
    AbstractInputPolicy,
    AbstractLinearSystem,
    ConcreteLinearSystem,
    DomainGap,
    OpenLoopSegment,
    OperatingEnvelope,
    JUMP_VALUE_RTOL,
)
from .synthesis import RefinementGains


class NonFiniteState(RuntimeError):
    """Integration produced NaN/Inf (divergence)."""


class ZenoViolation(RuntimeError):
    """Two input jumps closer than the minimum separation of 10 steps."""


#: minimum admissible spacing between jump events, in units of the step h
MIN_JUMP_SEPARATION_STEPS = 10

#: decay-bound slack applied when no step-halving calibration was run
DEFAULT_DECAY_SLACK = 1e-9


class PendingJump(NamedTuple):
    time: float
    cause: str
    delta: np.ndarray


@dataclass
class JumpRecord:
    time: float
    delta: np.ndarray
    cause: str  # segment_boundary | region_crossing
    lhs: float
    rhs: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "delta": [float(v) for v in self.delta],
            "cause": self.cause,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "passed": self.passed,
        }


@dataclass
class TrajectoryRecord:
    """Sampled joint evolution plus the jump log.

    Rows are strictly increasing in time, cover [t0, t0 + horizon], and
    every jump time appears exactly on the grid (its row stores the
    post-jump abstract input).
    """

    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    uhat: np.ndarray
    uhatdot: np.ndarray
    u: np.ndarray
    y: np.ndarray
    yhat: np.ndarray
    vg: np.ndarray
    err: np.ndarray
    jumps: list[JumpRecord]
    concrete: ConcreteLinearSystem
    abstract: AbstractLinearSystem
    h: float
    horizon: float
    t0: float
    initial_membership: bool
    decay_slack: float = DEFAULT_DECAY_SLACK

    @property
    def vg0(self) -> float:
        return float(self.vg[0])


def eval_policy(
    policy: AbstractInputPolicy,
    abstract: AbstractLinearSystem,
    t: float,
    xhat,
    t_next: float | None = None,
):
    """Abstract input, its exact derivative, and any pending jump.

    Open-loop segments evaluate the active polynomial and its derivative;
    switched feedback uses uhat = -K xhat with uhatdot = -K (A xhat + B uhat)
    by the chain rule.  A pending jump descriptor is returned when a segment
    boundary with a value discontinuity lies in (t, t_next]; feedback region
    crossings are state-dependent and located by the simulator instead.
    """
    xhat = np.asarray(xhat, dtype=float).reshape(-1)
    if policy.kind == "open_loop":
        seg = policy.segment_at(t)
        uhat = seg.value(t)
        uhatdot = seg.derivative(t)
        pending = None
        if t_next is not None:
            for tau in policy.breakpoints():
                if t < tau <= t_next:
                    before = policy.segment_at(tau - 1e-15 * max(1.0, abs(tau)))
                    after = policy.segment_at(tau)
                    delta = after.value(tau) - before.value(tau)
                    if np.linalg.norm(delta) > JUMP_VALUE_RTOL * max(
                        1.0, np.linalg.norm(before.value(tau))
                    ):
                        pending = PendingJump(tau, "segment_boundary", delta)
                        break
        return uhat, uhatdot, pending
    idx = policy.region_index(xhat)
    gain = policy.regions[idx].gain
    uhat = -gain @ xhat
    uhatdot = -gain @ (abstract.A @ xhat + abstract.B @ uhat)
    return uhat, uhatdot, None


# ---------------------------------------------------------------------------
# RK4 step matrices for the per-regime affine dynamics dz/dt = F z + N uhat


def _rk4_phi(F: np.ndarray, s: float) -> np.ndarray:
    eye = np.eye(F.shape[0])
    F2 = F @ F
    F3 = F2 @ F
    return eye + s * F + (s * s / 2.0) * F2 + (s**3 / 6.0) * F3 + (s**4 / 24.0) * F2 @ F2


def _rk4_affine(F: np.ndarray, N: np.ndarray, s: float):
    """Step matrices (Phi, D1, D2, D3) of classical RK4 for dz = F z + N u(t):
    z+ = Phi z + D1 u(t) + D2 u(t + s/2) + D3 u(t + s)."""
    FN = F @ N
    F2N = F @ FN
    F3N = F @ F2N
    phi = _rk4_phi(F, s)
    d1 = (s / 6.0) * N + (s * s / 6.0) * FN + (s**3 / 12.0) * F2N + (s**4 / 24.0) * F3N
    d2 = (2.0 * s / 3.0) * N + (s * s / 3.0) * FN + (s**3 / 12.0) * F2N
    d3 = (s / 6.0) * N
    return phi, d1, d2, d3


def _joint_matrices(concrete, abstract, gains):
    """F and N of the interconnected dynamics with the refined input."""
    A, B = concrete.A, concrete.B
    K, P, Q, S, R = gains.K, gains.P, gains.Q, gains.S, gains.R
    n, n_r = A.shape[0], abstract.A.shape[0]
    F = np.zeros((n + n_r, n + n_r))
    F[:n, :n] = A + B @ K
    F[:n, n:] = B @ (Q - K @ P)
    F[n:, n:] = abstract.A
    N = np.vstack([B @ (R - K @ S), abstract.B])
    return F, N


def _poly_values(seg: OpenLoopSegment, times: np.ndarray) -> np.ndarray:
    """(len(times), m_r) polynomial values of one segment."""
    powers = times[None, :] ** np.arange(seg.coeffs.shape[1])[:, None]
    return (seg.coeffs @ powers).T


def _poly_derivs(seg: OpenLoopSegment, times: np.ndarray) -> np.ndarray:
    deg = seg.coeffs.shape[1]
    if deg == 1:
        return np.zeros((times.size, seg.coeffs.shape[0]))
    k = np.arange(1, deg)
    powers = times[None, :] ** (k - 1)[:, None]
    return ((seg.coeffs[:, 1:] * k) @ powers).T


def _n_steps(a: float, b: float, h: float) -> int:
    return max(1, int(math.ceil((b - a) / h - 1e-9)))


class _Recorder:
    """Grow-able row store for (t, z, regime id)."""

    def __init__(self, nj: int, capacity: int):
        self.t = np.empty(max(capacity, 16))
        self.z = np.empty((max(capacity, 16), nj))
        self.regime = np.empty(max(capacity, 16), dtype=np.int64)
        self.count = 0

    def _grow(self, need: int):
        cap = self.t.size
        while cap < need:
            cap = int(cap * 1.5) + 16
        self.t = np.resize(self.t, cap)
        self.z = np.resize(self.z, (cap, self.z.shape[1]))
        self.regime = np.resize(self.regime, cap)

    def add(self, t: float, z: np.ndarray, regime: int):
        if self.count + 1 > self.t.size:
            self._grow(self.count + 1)
        self.t[self.count] = t
        self.z[self.count] = z
        self.regime[self.count] = regime
        self.count += 1

    def add_block(self, ts: np.ndarray, zs: np.ndarray, regime: int):
        need = self.count + ts.size
        if need > self.t.size:
            self._grow(need)
        self.t[self.count : need] = ts
        self.z[self.count : need] = zs
        self.regime[self.count : need] = regime
        self.count = need


def _check_finite(zs: np.ndarray, ts) -> None:
    if not np.all(np.isfinite(zs)):
        bad = np.flatnonzero(~np.all(np.isfinite(np.atleast_2d(zs)), axis=1))[0]
        t_bad = float(np.atleast_1d(ts)[min(bad, np.atleast_1d(ts).size - 1)])
        raise NonFiniteState(f"non-finite state near t = {t_bad:.6g}")


def simulate(
    concrete: ConcreteLinearSystem,
    abstract: AbstractLinearSystem,
    gains: RefinementGains,
    policy: AbstractInputPolicy,
    x0,
    xhat0,
    horizon: float,
    h: float,
    rbar_max: float = 0.0,
    t0: float = 0.0,
    epsilon: float | None = None,
) -> TrajectoryRecord:
    """Co-simulate the refined interconnection over [t0, t0 + horizon].

    Identical inputs produce bit-identical records.  The initial triple is
    checked for relation membership (a warning is issued when it fails and
    the record carries the flag); each jump is checked against the budget
    derived from `rbar_max` and logged.  `epsilon` defaults to the bundle's
    value and can be tightened per run.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    eps_run = gains.epsilon if epsilon is None else float(epsilon)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xhat0 = np.asarray(xhat0, dtype=float).reshape(-1)
    n, n_r = concrete.n, abstract.n_r
    if x0.size != n or xhat0.size != n_r:
        raise ValueError(f"initial states must have sizes {(n, n_r)}")

    uhat0, _, _ = eval_policy(policy, abstract, t0, xhat0)
    vg0 = refine.vg(refine.RelationPoint(x0, xhat0, uhat0), gains)
    initial_ok = vg0 <= eps_run
    if not initial_ok:
        warnings.warn(
            f"initial triple outside the relation: vg = {vg0:.6g} > "
            f"epsilon = {eps_run:.6g}",
            stacklevel=2,
        )

    F, N = _joint_matrices(concrete, abstract, gains)
    z0 = np.concatenate([x0, xhat0])
    t_end = t0 + horizon
    rec = _Recorder(n + n_r, _n_steps(t0, max(t_end, t0 + h), h) + 16)
    jumps: list[JumpRecord] = []
    min_sep = MIN_JUMP_SEPARATION_STEPS * h

    def log_jump(tau: float, delta: np.ndarray, cause: str):
        if jumps and tau - jumps[-1].time < min_sep:
            raise ZenoViolation(
                f"jumps at {jumps[-1].time:.6g} and {tau:.6g} violate the "
                f"minimum separation {min_sep:.6g}"
            )
        lhs, rhs, ok = refine.jump_admissible(
            delta, tau - t0, vg0, gains, eps_run, rbar_max
        )
        jumps.append(JumpRecord(tau, delta.copy(), cause, lhs, rhs, ok))

    if horizon == 0.0:
        rec.add(t0, z0, 0)
        z_final = z0
        final_regime = 0 if policy.kind == "open_loop" else policy.region_index(xhat0)
        rec.regime[0] = final_regime
    elif policy.kind == "open_loop":
        breaks = [t0]
        for tau in policy.breakpoints():
            if t0 + 1e-12 < tau < t_end - 1e-12:
                breaks.append(tau)
        breaks.append(t_end)
        z = z0
        for a, b in zip(breaks, breaks[1:]):
            seg_idx = policy.segment_index(a)
            seg = policy.segments[seg_idx]
            steps = _n_steps(a, b, h)
            h_eff = (b - a) / steps
            phi, d1, d2, d3 = _rk4_affine(F, N, h_eff)
            ts = a + h_eff * np.arange(steps)
            u1 = _poly_values(seg, ts)
            u2 = _poly_values(seg, ts + 0.5 * h_eff)
            u3 = _poly_values(seg, ts + h_eff)
            drive = u1 @ d1.T + u2 @ d2.T + u3 @ d3.T
            zs = np.empty((steps, z.size))
            with np.errstate(over="ignore", invalid="ignore"):
                for j in range(steps):
                    zs[j] = z
                    z = phi @ z + drive[j]
            _check_finite(zs, ts)
            _check_finite(z, b)
            rec.add_block(ts, zs, seg_idx)
            if b < t_end - 1e-12:
                nxt = policy.segment_at(b)
                delta = nxt.value(b) - seg.value(b)
                if np.linalg.norm(delta) > JUMP_VALUE_RTOL * max(
                    1.0, float(np.linalg.norm(seg.value(b)))
                ):
                    log_jump(b, delta, "segment_boundary")
        z_final = z
        final_regime = policy.segment_index(t_end)
        rec.add(t_end, z_final, final_regime)
    else:
        z_final, final_regime = _run_feedback(
            policy, F, N, z0, n, t0, t_end, h, rec, log_jump
        )
        rec.add(t_end, z_final, final_regime)

    times = rec.t[: rec.count].copy()
    zs = rec.z[: rec.count].copy()
    regimes = rec.regime[: rec.count].copy()
    return _assemble_record(
        concrete, abstract, gains, policy, times, zs, regimes, jumps,
        h, horizon, t0, initial_ok,
    )


def _propagate(phi: np.ndarray, z: np.ndarray, count: int) -> np.ndarray:
    """Rows z, phi z, ..., phi^(count-1) z by repeated doubling."""
    out = np.empty((count, z.size))
    out[0] = z
    filled = 1
    power = phi
    with np.errstate(over="ignore", invalid="ignore"):
        while filled < count:
            take = min(filled, count - filled)
            out[filled : filled + take] = out[:take] @ power.T
            filled += take
            if filled < count:
                power = power @ power
    return out


def _run_feedback(policy, F, N, z0, n, t0, t_end, h, rec, log_jump):
    """Integrate the switched-feedback regime over [t0, t_end).

    Between crossings the closed loop is autonomous with a constant RK4
    step map, so whole stretches are propagated at once; the first sample
    outside the active region brackets the crossing, which is then located
    by bisection and the enclosing step is split.  Emits rows on the fixed
    grid plus one row at each located crossing time (carrying the post-jump
    region).  Returns (z(t_end), final region).
    """

    def region_of(xhat) -> int:
        return policy.region_index(xhat)

    lows = np.array([r.box.lows for r in policy.regions])
    highs = np.array([r.box.highs for r in policy.regions])

    closed: dict[int, np.ndarray] = {}

    def f_closed(idx: int) -> np.ndarray:
        if idx not in closed:
            gain = policy.regions[idx].gain
            sel = np.zeros((gain.shape[1], F.shape[0]))
            sel[:, n:] = np.eye(gain.shape[1])
            closed[idx] = F - N @ (gain @ sel)
        return closed[idx]

    steps = _n_steps(t0, t_end, h)
    h_eff = (t_end - t0) / steps
    ts = t0 + h_eff * np.arange(steps + 1)
    ts[steps] = t_end
    tol_t = max(1e-9 * (t_end - t0), 1e-15)
    region = region_of(z0[n:])
    z = z0
    i = 0
    while i < steps:
        phi = _rk4_phi(f_closed(region), h_eff)
        block = _propagate(phi, z, steps - i + 1)
        _check_finite(block, ts[i:])
        xh = block[:, n:]
        inside = np.all((xh >= lows[region]) & (xh <= highs[region]), axis=1)
        exits = np.flatnonzero(~inside)
        if exits.size == 0:
            rec.add_block(ts[i:steps], block[:-1], region)
            return block[-1], region

        j = int(exits[0])  # first sample outside; j >= 1 since z is inside
        if j == 0:
            raise DomainGap(
                f"state at t = {ts[i]:.6g} inconsistent with its region"
            )
        rec.add_block(ts[i : i + j], block[:j], region)
        z_a, z_b = block[j - 1], block[j]
        t_a, t_b = ts[i + j - 1], ts[i + j]

        # bisect the crossing inside (t_a, t_b]
        ff = f_closed(region)
        lo_s, hi_s = 0.0, t_b - t_a
        while hi_s - lo_s > tol_t:
            mid = 0.5 * (lo_s + hi_s)
            xh_mid = (_rk4_phi(ff, mid) @ z_a)[n:]
            if np.all((xh_mid >= lows[region]) & (xh_mid <= highs[region])):
                lo_s = mid
            else:
                hi_s = mid
        s_cross = max(hi_s, tol_t)
        split = (t_b - t_a) - s_cross > tol_t
        if split:
            tau = t_a + s_cross
            z_tau = _rk4_phi(ff, s_cross) @ z_a
        else:
            # crossing at (numerically) the step end: snap to the grid point
            tau = t_b
            z_tau = z_b
        new_region = region_of(z_b[n:])
        gain_old = policy.regions[region].gain
        gain_new = policy.regions[new_region].gain
        xhat_tau = z_tau[n:]
        delta = (gain_old - gain_new) @ xhat_tau
        if np.linalg.norm(delta) > JUMP_VALUE_RTOL * max(
            1.0, float(np.linalg.norm(gain_old @ xhat_tau))
        ):
            log_jump(tau, delta, "region_crossing")
        region = new_region
        if split:
            rec.add(tau, z_tau, region)
            z = _rk4_phi(f_closed(region), t_b - tau) @ z_tau
            xh_end = z[n:]
            if not np.all((xh_end >= lows[region]) & (xh_end <= highs[region])):
                raise ZenoViolation(
                    f"second region crossing within one step at t ~ {t_b:.6g}"
                )
        else:
            z = z_tau
        _check_finite(z, t_b)
        i = i + j
    return z, region


def _assemble_record(
    concrete, abstract, gains, policy, times, zs, regimes, jumps,
    h, horizon, t0, initial_ok,
) -> TrajectoryRecord:
    n = concrete.n
    x = zs[:, :n]
    xhat = zs[:, n:]
    count = times.size
    m_r = abstract.m_r
    uhat = np.empty((count, m_r))
    uhatdot = np.empty((count, m_r))

    # per contiguous regime run, vectorized input reconstruction
    starts = [0] + [i for i in range(1, count) if regimes[i] != regimes[i - 1]] + [count]
    for a, b in zip(starts, starts[1:]):
        idx = int(regimes[a])
        if policy.kind == "open_loop":
            seg = policy.segments[idx]
            uhat[a:b] = _poly_values(seg, times[a:b])
            uhatdot[a:b] = _poly_derivs(seg, times[a:b])
        else:
            gain = policy.regions[idx].gain
            uhat[a:b] = -(xhat[a:b] @ gain.T)
            xhatdot = xhat[a:b] @ abstract.A.T + uhat[a:b] @ abstract.B.T
            uhatdot[a:b] = -(xhatdot @ gain.T)

    e = x - xhat @ gains.P.T - uhat @ gains.S.T
    u = e @ gains.K.T + xhat @ gains.Q.T + uhat @ gains.R.T
    y = x @ concrete.C.T
    yhat = xhat @ abstract.C.T
    vg = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", e, gains.M, e), 0.0))
    err = np.linalg.norm(y - yhat, axis=1)
    return TrajectoryRecord(
        t=times,
        x=x,
        xhat=xhat,
        uhat=uhat,
        uhatdot=uhatdot,
        u=u,
        y=y,
        yhat=yhat,
        vg=vg,
        err=err,
        jumps=jumps,
        concrete=concrete,
        abstract=abstract,
        h=h,
        horizon=horizon,
        t0=t0,
        initial_membership=initial_ok,
    )


def simulate_calibrated(
    concrete, abstract, gains, policy, x0, xhat0, horizon, h,
    rbar_max: float = 0.0, t0: float = 0.0, epsilon: float | None = None,
    safety: float = 20.0,
) -> TrajectoryRecord:
    """Simulate and calibrate the decay-check slack by step halving.

    The slack kappa * h^4 absorbs the integration error of the sampled
    simulation-function values; kappa is estimated once per scenario from
    the deviation between the h and h/2 runs on shared grid times.
    """
    rec = simulate(
        concrete, abstract, gains, policy, x0, xhat0, horizon, h, rbar_max, t0, epsilon
    )
    rec_half = simulate(
        concrete, abstract, gains, policy, x0, xhat0, horizon, h / 2.0, rbar_max, t0,
        epsilon,
    )
    ta = np.round(rec.t, 9)
    tb = np.round(rec_half.t, 9)
    _, ia, ib = np.intersect1d(ta, tb, return_indices=True)
    dev = float(np.max(np.abs(rec.vg[ia] - rec_half.vg[ib]))) if ia.size else 0.0
    rec.decay_slack = max(safety * dev, 1e-12)
    return rec


@dataclass
class VerificationReport:
    """Sample-wise and budget checks of one trajectory record."""

    max_output_error: float
    max_vg: float
    max_u_norm: float
    output_error_ok: bool
    vg_ok: bool
    input_ok: bool
    envelope_violation_count: int
    envelope_violations: list[dict] = field(default_factory=list)
    jumps_total: int = 0
    jumps_passed: int = 0
    decay_violations: int = 0
    first_decay_violation_time: float | None = None
    initial_membership: bool = True
    decay_slack: float = DEFAULT_DECAY_SLACK

    @property
    def envelope_ok(self) -> bool:
        return self.envelope_violation_count == 0

    @property
    def jumps_ok(self) -> bool:
        return self.jumps_passed == self.jumps_total

    @property
    def decay_ok(self) -> bool:
        return self.decay_violations == 0

    @property
    def passed(self) -> bool:
        return (
            self.output_error_ok
            and self.vg_ok
            and self.input_ok
            and self.envelope_ok
            and self.jumps_ok
            and self.decay_ok
        )

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_output_error": self.max_output_error,
            "max_vg": self.max_vg,
            "max_u_norm": self.max_u_norm,
            "output_error_ok": self.output_error_ok,
            "vg_ok": self.vg_ok,
            "input_ok": self.input_ok,
            "envelope_ok": self.envelope_ok,
            "envelope_violation_count": self.envelope_violation_count,
            "envelope_violations": self.envelope_violations,
            "jumps_total": self.jumps_total,
            "jumps_passed": self.jumps_passed,
            "jumps_ok": self.jumps_ok,
            "decay_violations": self.decay_violations,
            "first_decay_violation_time": self.first_decay_violation_time,
            "decay_ok": self.decay_ok,
            "initial_membership": self.initial_membership,
            "decay_slack": self.decay_slack,
        }


def verify_trajectory(
    record: TrajectoryRecord,
    gains: RefinementGains,
    epsilon: float,
    envelope: OperatingEnvelope,
    b_U: float,
    rbar_max: float,
    decay_slack: float | None = None,
) -> VerificationReport:
    """Check the record against the relation, the input ball, the envelope,
    the between-jumps decay bound, and the logged jump budgets.

    The decay bound is verified between consecutive jump times, anchored at
    each window's first sample, with slack for integration error.
    """
    slack = record.decay_slack if decay_slack is None else decay_slack
    u_norm = np.linalg.norm(record.u, axis=1)
    xhat_norm = np.linalg.norm(record.xhat, axis=1)
    uhat_norm = np.linalg.norm(record.uhat, axis=1)
    uhatdot_norm = np.linalg.norm(record.uhatdot, axis=1)

    violations: list[dict] = []
    count = 0
    for name, values, bound in (
        ("xhat_max", xhat_norm, envelope.xhat_max),
        ("uhat_max", uhat_norm, envelope.uhat_max),
        ("uhatdot_max", uhatdot_norm, envelope.uhatdot_max),
    ):
        bad = np.flatnonzero(values > bound)
        count += bad.size
        for i in bad[:10]:
            violations.append(
                {"time": float(record.t[i]), "bound": name, "value": float(values[i])}
            )

    # decay bound per inter-jump window, anchored at the window start sample;
    # a jump-time row stores the post-jump value and belongs to the window it
    # opens, not the one it closes
    decay_violations = 0
    first_violation = None
    window_edges = [record.t[0]] + [j.time for j in record.jumps] + [record.t[-1]]
    limit = 2.0 * rbar_max / gains.a1
    for i, (a, b) in enumerate(zip(window_edges, window_edges[1:])):
        final = i == len(window_edges) - 2
        upper = record.t <= b if final else record.t < b
        sel = np.flatnonzero((record.t >= a) & upper)
        if sel.size == 0:
            continue
        ts = record.t[sel]
        vgs = record.vg[sel]
        bound = np.exp(-0.5 * gains.a1 * (ts - ts[0])) * (vgs[0] - limit) + limit + slack
        bad = np.flatnonzero(vgs > bound)
        if bad.size:
            decay_violations += int(bad.size)
            t_bad = float(ts[bad[0]])
            if first_violation is None or t_bad < first_violation:
                first_violation = t_bad

    jumps_passed = 0
    for j in record.jumps:
        lhs, rhs, ok = refine.jump_admissible(
            j.delta, j.time - record.t0, record.vg0, gains, epsilon, rbar_max
        )
        if ok and abs(lhs - j.lhs) <= 1e-9 * max(1.0, abs(j.lhs)):
            jumps_passed += 1

    max_err = float(np.max(record.err))
    max_vg = float(np.max(record.vg))
    max_u = float(np.max(u_norm)) if u_norm.size else 0.0
    return VerificationReport(
        max_output_error=max_err,
        max_vg=max_vg,
        max_u_norm=max_u,
        output_error_ok=bool(max_err <= epsilon),
        vg_ok=bool(max_vg <= epsilon),
        input_ok=bool(max_u <= b_U),
        envelope_violation_count=int(count),
        envelope_violations=violations,
        jumps_total=len(record.jumps),
        jumps_passed=jumps_passed,
        decay_violations=decay_violations,
        first_decay_violation_time=first_violation,
        initial_membership=record.initial_membership,
        decay_slack=slack,
    )


# ---------------------------------------------------------------------------
# CSV artifacts (15 significant digits, deterministic bytes)


def _fmt(v: float) -> str:
    return f"{v:.15g}"


def trajectory_csv(record: TrajectoryRecord) -> str:
    n = record.x.shape[1]
    n_r = record.xhat.shape[1]
    m_r = record.uhat.shape[1]
    m = record.u.shape[1]
    p = record.y.shape[1]
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"xhat{i + 1}" for i in range(n_r)]
        + [f"uhat{i + 1}" for i in range(m_r)]
        + [f"uhatdot{i + 1}" for i in range(m_r)]
        + [f"u{i + 1}" for i in range(m)]
        + [f"y{i + 1}" for i in range(p)]
        + [f"yhat{i + 1}" for i in range(p)]
        + ["vg", "err"]
    )
    table = np.column_stack(
        [
            record.t,
            record.x,
            record.xhat,
            record.uhat,
            record.uhatdot,
            record.u,
            record.y,
            record.yhat,
            record.vg,
            record.err,
        ]
    )
    row_fmt = ",".join(["%.15g"] * table.shape[1])
    lines = [",".join(header)]
    lines.extend(row_fmt % tuple(row) for row in table)
    return "\n".join(lines) + "\n"


def jumps_csv(record: TrajectoryRecord) -> str:
    m_r = record.uhat.shape[1]
    header = ["tau"] + [f"delta{i + 1}" for i in range(m_r)] + ["lhs", "rhs", "pass"]
    lines = [",".join(header)]
    for j in record.jumps:
        row = [_fmt(j.time)] + [_fmt(v) for v in j.delta] + [
            _fmt(j.lhs),
            _fmt(j.rhs),
            "true" if j.passed else "false",
        ]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
