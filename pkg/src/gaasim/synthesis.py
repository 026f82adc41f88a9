"""Computes the refinement parameter bundle (M, P, Q, S, R, decay rates,
input bound) for a concrete/abstract system pair and checks every standing
hypothesis: the structural equalities, the Lyapunov decay inequality, the
argmin optimality of the couplings, the input bound, the disturbance-budget
feasibility, and the initial-set lift.

The stabilizing gain K is a required user input; the tool validates it (and
reports the largest admissible decay rate) rather than synthesizing it.  M
is obtained from a unit-right-hand-side Lyapunov solve plus scaling so the
output weight is dominated, or supplied by the user and validated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import numerics, refine
from .model import (
    AbstractInputPolicy,
    AbstractLinearSystem,
    ConcreteLinearSystem,
    DomainGap,
    OperatingEnvelope,
)
from .numerics import as_matrix


class NotStabilizing(ValueError):
    """A + B K is not Hurwitz, or the requested decay rate is infeasible."""


#: tolerance on the structural equalities ||C P - Chat||_F and ||C S||_F
STRUCT_TOL = 1e-9

#: tolerance on re-solved couplings when auditing a gains bundle
RESOLVE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class RefinementGains:
    """Full parameter bundle of the simulation function and interface."""

    M: np.ndarray
    M_sqrt: np.ndarray
    K: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    a1: float
    epsilon: float
    rbar1: float
    rbar2: float
    rbar3: float
    lambda_min_M: float
    input_bound: float

    def __post_init__(self):
        for name in ("M", "M_sqrt", "K", "P", "Q", "S", "R"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        n = self.M.shape[0]
        m, n_r = self.Q.shape
        m_r = self.S.shape[1]
        expected = {
            "M": (n, n),
            "M_sqrt": (n, n),
            "K": (m, n),
            "P": (n, n_r),
            "Q": (m, n_r),
            "S": (n, m_r),
            "R": (m, m_r),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(
                    f"gains.{name}: expected shape {shape}, got {getattr(self, name).shape}"
                )
        if not (self.a1 > 0 and self.epsilon > 0):
            raise ValueError("gains require a1 > 0 and epsilon > 0")

    def to_dict(self) -> dict:
        def rows(m):
            return [[float(v) for v in row] for row in m]

        return {
            "M": rows(self.M),
            "M_sqrt": rows(self.M_sqrt),
            "K": rows(self.K),
            "P": rows(self.P),
            "Q": rows(self.Q),
            "S": rows(self.S),
            "R": rows(self.R),
            "a1": self.a1,
            "epsilon": self.epsilon,
            "rbar1": self.rbar1,
            "rbar2": self.rbar2,
            "rbar3": self.rbar3,
            "lambda_min_M": self.lambda_min_M,
            "input_bound": self.input_bound,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RefinementGains":
        kwargs = {}
        for name in ("M", "M_sqrt", "K", "P", "Q", "S", "R"):
            kwargs[name] = np.array(d[name], dtype=float)
        for name in (
            "a1",
            "epsilon",
            "rbar1",
            "rbar2",
            "rbar3",
            "lambda_min_M",
            "input_bound",
        ):
            kwargs[name] = float(d[name])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "RefinementGains":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ConditionRecord:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ConditionReport:
    records: tuple[ConditionRecord, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def record(self, name: str) -> ConditionRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "records": [r.to_dict() for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def max_feasible_a1(A, B, K) -> float:
    """Largest decay rate admitting a Lyapunov certificate: -2 max Re(eig(A+BK)).

    Callers must pick a1 strictly below the returned value.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    K = as_matrix(K, "K")
    alpha = numerics.real_spectral_abscissa(A + B @ K)
    if alpha >= 0:
        raise NotStabilizing(f"A + B K has spectral abscissa {alpha:.6g} >= 0")
    return -2.0 * alpha


def synthesize_M(A, B, C, K, a1: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Weight matrix from a shifted Lyapunov solve with unit right-hand side.

    Solves (Acl + a1/2 I)^T M0 + M0 (Acl + a1/2 I) = -I, then scales so the
    output Gramian C^T C is dominated; the scaling preserves the decay
    inequality because both sides are homogeneous in M.  Returns
    (M, M_sqrt, lambda_min(M)).
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    K = as_matrix(K, "K")
    feasible = max_feasible_a1(A, B, K)
    if not a1 < feasible:
        raise NotStabilizing(
            f"a1 = {a1:.6g} is not strictly below the feasible bound {feasible:.6g}"
        )
    shifted = A + B @ K + 0.5 * a1 * np.eye(A.shape[0])
    m0 = numerics.solve_sylvester(shifted.T, shifted, -np.eye(A.shape[0]))
    m0 = 0.5 * (m0 + m0.T)

    values, vectors = numerics.sym_eig(m0)
    if values[0] <= 0:
        raise NotStabilizing(
            f"Lyapunov solution not positive definite (lambda_min {values[0]:.3e})"
        )
    inv_sqrt = vectors @ np.diag(1.0 / np.sqrt(values)) @ vectors.T
    weight = inv_sqrt @ (C.T @ C) @ inv_sqrt
    lam_top = numerics.sym_eig(0.5 * (weight + weight.T)).values[-1]
    scale = max(1.0, lam_top * (1.0 + 1e-6))
    M = scale * m0
    M_sqrt = numerics.psd_sqrt(M)
    lam_min = numerics.sym_eig(M).values[0]
    return M, M_sqrt, float(lam_min)


def _vec(m: np.ndarray) -> np.ndarray:
    return m.reshape(-1, order="F")


def _unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return v.reshape((rows, cols), order="F")


def solve_PQ(A, Ahat, B, C, Chat, M_sqrt) -> tuple[np.ndarray, np.ndarray, float]:
    """Minimize ||M^{1/2}(A P - P Ahat + B Q)|| subject to C P = Chat.

    Returns (P, Q, rbar1) with rbar1 the spectral norm of the achieved
    weighted residual.
    """
    A, Ahat = as_matrix(A, "A"), as_matrix(Ahat, "Ahat")
    B, C, Chat = as_matrix(B, "B"), as_matrix(C, "C"), as_matrix(Chat, "Chat")
    M_sqrt = as_matrix(M_sqrt, "M_sqrt")
    n, m, n_r = A.shape[0], B.shape[1], Ahat.shape[0]

    eye_r = np.eye(n_r)
    obj = np.hstack(
        [
            np.kron(eye_r, M_sqrt @ A) - np.kron(Ahat.T, M_sqrt),
            np.kron(eye_r, M_sqrt @ B),
        ]
    )
    eq = np.hstack([np.kron(eye_r, C), np.zeros((C.shape[0] * n_r, m * n_r))])
    sol = numerics.constrained_lstsq(obj, np.zeros(obj.shape[0]), eq, _vec(Chat))
    P = _unvec(sol[: n * n_r], n, n_r)
    Q = _unvec(sol[n * n_r :], m, n_r)
    rbar1 = numerics.spectral_norm(M_sqrt @ (A @ P - P @ Ahat + B @ Q))
    return P, Q, rbar1


def solve_SR(
    A, B, C, P, Bhat, M_sqrt, force_s_zero: bool = False
) -> tuple[np.ndarray, np.ndarray, float]:
    """Minimize ||M^{1/2}(A S + B R - P Bhat)|| subject to C S = 0.

    With force_s_zero the S = 0 interface of the classical refinement is
    reproduced and only R is optimized.  Returns (S, R, rbar2).
    """
    A, B, C = as_matrix(A, "A"), as_matrix(B, "B"), as_matrix(C, "C")
    P, Bhat = as_matrix(P, "P"), as_matrix(Bhat, "Bhat")
    M_sqrt = as_matrix(M_sqrt, "M_sqrt")
    n, m, m_r = A.shape[0], B.shape[1], Bhat.shape[1]
    eye_r = np.eye(m_r)
    target = _vec(M_sqrt @ (P @ Bhat))

    if force_s_zero:
        obj = np.kron(eye_r, M_sqrt @ B)
        R = _unvec(numerics.constrained_lstsq(obj, target), m, m_r)
        S = np.zeros((n, m_r))
    else:
        obj = np.hstack([np.kron(eye_r, M_sqrt @ A), np.kron(eye_r, M_sqrt @ B)])
        eq = np.hstack(
            [np.kron(eye_r, C), np.zeros((C.shape[0] * m_r, m * m_r))]
        )
        sol = numerics.constrained_lstsq(obj, target, eq, np.zeros(eq.shape[0]))
        S = _unvec(sol[: n * m_r], n, m_r)
        R = _unvec(sol[n * m_r :], m, m_r)
    rbar2 = numerics.spectral_norm(M_sqrt @ (A @ S + B @ R - P @ Bhat))
    return S, R, rbar2


def rbar3_of(M_sqrt, S) -> float:
    """Input-rate sensitivity ||M^{1/2} S||."""
    return numerics.spectral_norm(as_matrix(M_sqrt, "M_sqrt") @ as_matrix(S, "S"))


def input_bound(
    K, Q, R, lambda_min_M: float, epsilon: float, envelope: OperatingEnvelope, b_U: float
) -> tuple[float, bool]:
    """Certified input bound b and its admissibility against the input ball.

    b = ||K|| eps / sqrt(lambda_min(M)) + ||Q|| xhat_max + ||R|| uhat_max,
    an operator-norm over-approximation of the state-dependent terms over
    the envelope.
    """
    b = numerics.spectral_norm(K) * epsilon / np.sqrt(lambda_min_M)
    b += numerics.spectral_norm(Q) * envelope.xhat_max
    b += numerics.spectral_norm(R) * envelope.uhat_max
    return float(b), bool(b <= b_U)


def feasibility(
    rbar1: float,
    rbar2: float,
    rbar3: float,
    envelope: OperatingEnvelope,
    a1: float,
    epsilon: float,
) -> tuple[float, float, bool]:
    """Disturbance budget rbar_max over the envelope and the decay test.

    Returns (rbar_max, margin, pass) with margin = epsilon - 2 rbar_max / a1.
    """
    rbar_max = (
        rbar1 * envelope.xhat_max
        + rbar2 * envelope.uhat_max
        + rbar3 * envelope.uhatdot_max
    )
    margin = epsilon - 2.0 * rbar_max / a1
    return float(rbar_max), float(margin), bool(margin >= 0.0)


def synthesize_gains(
    concrete: ConcreteLinearSystem,
    abstract: AbstractLinearSystem,
    K,
    a1: float,
    epsilon: float,
    envelope: OperatingEnvelope,
    M=None,
    force_s_zero: bool = False,
) -> RefinementGains:
    """End-to-end bundle computation.

    When M is supplied it is used as-is (after a PSD sanity check); whether
    it satisfies the decay inequality at the requested a1 is reported by
    check_assumption rather than raised here.
    """
    K = as_matrix(K, "K")
    if M is None:
        M, M_sqrt, lam_min = synthesize_M(concrete.A, concrete.B, concrete.C, K, a1)
    else:
        M = as_matrix(M, "M")
        M = 0.5 * (M + M.T)
        M_sqrt = numerics.psd_sqrt(M)
        lam_min = float(numerics.sym_eig(M).values[0])
        if lam_min <= 0:
            raise numerics.NotPSD(f"supplied M has lambda_min {lam_min:.3e} <= 0")

    P, Q, rbar1 = solve_PQ(concrete.A, abstract.A, concrete.B, concrete.C, abstract.C, M_sqrt)
    S, R, rbar2 = solve_SR(concrete.A, concrete.B, concrete.C, P, abstract.B, M_sqrt, force_s_zero)
    rbar3 = rbar3_of(M_sqrt, S)
    b, _ = input_bound(K, Q, R, lam_min, epsilon, envelope, concrete.input_ball_radius)
    return RefinementGains(
        M=M,
        M_sqrt=M_sqrt,
        K=K,
        P=P,
        Q=Q,
        S=S,
        R=R,
        a1=float(a1),
        epsilon=float(epsilon),
        rbar1=float(rbar1),
        rbar2=float(rbar2),
        rbar3=float(rbar3),
        lambda_min_M=float(lam_min),
        input_bound=float(b),
    )


def _policy_uhat0(policy: AbstractInputPolicy | None, xhat0: np.ndarray, m_r: int):
    if policy is None:
        return np.zeros(m_r)
    if policy.kind == "open_loop":
        return policy.segments[0].value(policy.segments[0].t_start)
    idx = policy.region_index(xhat0)
    return -policy.regions[idx].gain @ xhat0


def check_assumption(
    concrete: ConcreteLinearSystem,
    abstract: AbstractLinearSystem,
    gains: RefinementGains,
    envelope: OperatingEnvelope,
    policy: AbstractInputPolicy | None = None,
) -> ConditionReport:
    """One record per standing condition, with numeric residual or margin.

    Structural equalities, positive definiteness and output-weight
    domination of M, the Lyapunov decay inequality at a1, optimality of the
    couplings against fresh re-solves, the input bound against the input
    ball, the disturbance-budget feasibility, and the initial-set lift over
    the corner points of the abstract initial box.
    """
    A, B, C = concrete.A, concrete.B, concrete.C
    M, K = gains.M, gains.K
    records: list[ConditionRecord] = []

    cp = float(np.linalg.norm(C @ gains.P - abstract.C, "fro"))
    records.append(
        ConditionRecord("CP_equals_Chat", cp, STRUCT_TOL, cp <= STRUCT_TOL, "||C P - Chat||_F")
    )
    cs = float(np.linalg.norm(C @ gains.S, "fro"))
    records.append(ConditionRecord("CS_zero", cs, STRUCT_TOL, cs <= STRUCT_TOL, "||C S||_F"))

    m_eigs = numerics.sym_eig(M).values
    records.append(
        ConditionRecord(
            "M_positive_definite",
            float(m_eigs[0]),
            0.0,
            bool(m_eigs[0] > 0),
            "lambda_min(M)",
        )
    )
    gap = numerics.sym_eig(M - C.T @ C).values[0]
    gap_tol = -1e-9 * float(m_eigs[-1])
    records.append(
        ConditionRecord(
            "output_weight_dominated",
            float(gap),
            gap_tol,
            bool(gap >= gap_tol),
            "lambda_min(M - C^T C)",
        )
    )

    acl = A + B @ K
    lyap = acl.T @ M + M @ acl + gains.a1 * M
    lyap_top = float(numerics.sym_eig(0.5 * (lyap + lyap.T)).values[-1])
    lyap_tol = 1e-9 * numerics.spectral_norm(M)
    records.append(
        ConditionRecord(
            "lyapunov_decay",
            lyap_top,
            lyap_tol,
            lyap_top <= lyap_tol,
            "lambda_max((A+BK)^T M + M (A+BK) + a1 M)",
        )
    )

    P_new, Q_new, _ = solve_PQ(A, abstract.A, B, C, abstract.C, gains.M_sqrt)
    pq_dev = float(
        max(np.max(np.abs(P_new - gains.P)), np.max(np.abs(Q_new - gains.Q)))
    )
    records.append(
        ConditionRecord(
            "PQ_optimal", pq_dev, RESOLVE_TOL, pq_dev <= RESOLVE_TOL, "max re-solve deviation"
        )
    )
    S_new, R_new, _ = solve_SR(A, B, C, gains.P, abstract.B, gains.M_sqrt)
    sr_dev = float(
        max(np.max(np.abs(S_new - gains.S)), np.max(np.abs(R_new - gains.R)))
    )
    records.append(
        ConditionRecord(
            "SR_optimal", sr_dev, RESOLVE_TOL, sr_dev <= RESOLVE_TOL, "max re-solve deviation"
        )
    )

    r3 = rbar3_of(gains.M_sqrt, gains.S)
    r3_dev = abs(r3 - gains.rbar3)
    records.append(
        ConditionRecord(
            "rbar3_consistent", r3_dev, STRUCT_TOL, r3_dev <= STRUCT_TOL, "| ||M^{1/2}S|| - rbar3 |"
        )
    )

    b, b_ok = input_bound(
        K, gains.Q, gains.R, gains.lambda_min_M, gains.epsilon, envelope,
        concrete.input_ball_radius,
    )
    records.append(
        ConditionRecord(
            "input_bound",
            b,
            concrete.input_ball_radius,
            b_ok,
            "b vs input ball radius",
        )
    )

    rbar_max, margin, feas_ok = feasibility(
        gains.rbar1, gains.rbar2, gains.rbar3, envelope, gains.a1, gains.epsilon
    )
    records.append(
        ConditionRecord(
            "feasibility",
            2.0 * rbar_max / gains.a1,
            gains.epsilon,
            feas_ok,
            f"2 rbar_max / a1 vs epsilon (rbar_max={rbar_max:.6g}, margin={margin:.6g})",
        )
    )

    # initial lift: every corner of the abstract initial box must admit a
    # concrete initial state within epsilon; the lift (clamped into the
    # concrete initial box) is the witness
    try:
        worst = 0.0
        for corner in abstract.initial_state_set.corners():
            uhat0 = _policy_uhat0(policy, corner, gains.S.shape[1])
            lifted = refine.lift_initial(corner, uhat0, gains)
            witness = concrete.initial_state_set.clamp(lifted)
            worst = max(worst, refine.vg(refine.RelationPoint(witness, corner, uhat0), gains))
        records.append(
            ConditionRecord(
                "initial_lift",
                worst,
                gains.epsilon,
                worst <= gains.epsilon,
                "max vg over lifted corners of the abstract initial box",
            )
        )
    except DomainGap as exc:
        records.append(
            ConditionRecord("initial_lift", np.inf, gains.epsilon, False, str(exc))
        )

    return ConditionReport(tuple(records))
