"""Frozen-Gaussian trajectories: Hamiltonian flow, action, Jacobian, amplitude.

A :class:`TrajectoryState` holds an *ensemble* of trajectories; every field
carries a leading trajectory axis of length ``n``.  A single trajectory is
the ``n == 1`` case.  All trajectories are advanced together with the same
fixed-step RK4 scheme, which is equivalent to integrating each one alone
(the right-hand side is evaluated pointwise along the trajectory axis).

Jacobian layout
---------------
``F`` is the ``2d x 2d`` Jacobian of ``(q, p) -> (Q, P)`` with rows ordered
``(Q_1..Q_d, P_1..P_d)`` and columns ``(q_1..q_d, p_1..p_d)``::

    F[:d, :d] = dQ/dq     F[:d, d:] = dQ/dp
    F[d:, :d] = dP/dq     F[d:, d:] = dP/dp

with ``(dQ/dq)[i, j] = dQ_i / dq_j``.  This is the standard variational
matrix; ``F^T J F = J`` for ``J = [[0, I], [-I, 0]]``.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .symbols import SymbolSet, kinetic_grad, kinetic_hess, potential_grad, potential_hess, potential_value

__all__ = [
    "TrajectoryState",
    "FlowDerivative",
    "SingularZError",
    "TrajectoryError",
    "symplectic_matrix",
    "symplectic_defect",
    "z_matrix",
    "z_dot",
    "flow_rhs",
    "rk4_step",
    "integrate_trajectory",
    "initial_state",
]

logger = logging.getLogger(__name__)

# condition-number ceiling for Z before a step is rejected
Z_COND_MAX = 1.0e12


class SingularZError(ArithmeticError):
    """Z is numerically non-invertible for some trajectories."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = np.asarray(indices, dtype=int)


class TrajectoryError(RuntimeError):
    """Integration failed; ``labels`` holds the offending ``(q0, p0)`` pairs."""

    def __init__(self, message, labels=(), step=None):
        super().__init__(message)
        self.labels = list(labels)
        self.step = step


@dataclass
class TrajectoryState:
    """Ensemble of frozen Gaussians.

    Attributes
    ----------
    q0, p0 : (n, d) arrays
        Phase-space labels.
    Q, P : (n, d) arrays
        Live centers.
    S : (n,) array
        Action.
    F : (n, 2d, 2d) array
        Flow Jacobian (see module docstring for the block layout).
    log_A : (n,) complex array
        Logarithm of the complex weight; ``A = exp(log_A)``.
    t : float
        Time reached.
    max_defect : (n,) array
        Running maximum of ``|F^T J F - J|_inf``.
    min_abs_det_z : (n,) array
        Running minimum of ``|det Z|``.
    """

    q0: np.ndarray
    p0: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    S: np.ndarray
    F: np.ndarray
    log_A: np.ndarray
    t: float = 0.0
    max_defect: np.ndarray = None
    min_abs_det_z: np.ndarray = None

    def __post_init__(self):
        n = self.Q.shape[0]
        if self.max_defect is None:
            self.max_defect = np.zeros(n)
        if self.min_abs_det_z is None:
            self.min_abs_det_z = np.full(n, np.inf)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def dim(self) -> int:
        return self.Q.shape[1]

    @property
    def A(self) -> np.ndarray:
        return np.exp(self.log_A)

    def __len__(self):
        return self.n

    def take(self, idx) -> "TrajectoryState":
        """Sub-ensemble selected by an index array or slice."""
        return dataclasses.replace(
            self,
            q0=self.q0[idx], p0=self.p0[idx], Q=self.Q[idx], P=self.P[idx],
            S=self.S[idx], F=self.F[idx], log_A=self.log_A[idx],
            max_defect=self.max_defect[idx], min_abs_det_z=self.min_abs_det_z[idx])

    @classmethod
    def concatenate(cls, parts) -> "TrajectoryState":
        parts = list(parts)
        cat = lambda name: np.concatenate([getattr(s, name) for s in parts], axis=0)
        return cls(q0=cat("q0"), p0=cat("p0"), Q=cat("Q"), P=cat("P"), S=cat("S"),
                   F=cat("F"), log_A=cat("log_A"), t=parts[0].t,
                   max_defect=cat("max_defect"), min_abs_det_z=cat("min_abs_det_z"))


@dataclass
class FlowDerivative:
    """Right-hand sides of the trajectory ODEs."""

    dQ: np.ndarray
    dP: np.ndarray
    dS: np.ndarray
    dF: np.ndarray
    dLogA: np.ndarray

    def __post_init__(self):
        for name in ("dQ", "dP", "dS", "dF", "dLogA"):
            v = getattr(self, name)
            ok = np.isfinite(v).reshape(v.shape[0], -1).all(axis=1)
            if not ok.all():
                exc = FloatingPointError(f"non-finite entries in {name}")
                exc.indices = np.flatnonzero(~ok)
                raise exc


def initial_state(q, p, A0=None) -> TrajectoryState:
    """Trajectories starting at labels ``(q, p)`` with ``F = I`` and ``S = 0``.

    ``A0`` defaults to ``2^(d/2)``, the value of the bare amplitude ``a``.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    n, d = q.shape
    if A0 is None:
        A0 = np.full(n, 2.0 ** (d / 2.0), dtype=complex)
    A0 = np.broadcast_to(np.asarray(A0, dtype=complex), (n,))
    with np.errstate(divide="ignore"):
        log_A = np.log(A0)
    F = np.broadcast_to(np.eye(2 * d), (n, 2 * d, 2 * d)).copy()
    return TrajectoryState(q0=q.copy(), p0=p.copy(), Q=q.copy(), P=p.copy(),
                           S=np.zeros(n), F=F, log_A=log_A.astype(complex))


def symplectic_matrix(d: int) -> np.ndarray:
    J = np.zeros((2 * d, 2 * d))
    J[:d, d:] = np.eye(d)
    J[d:, :d] = -np.eye(d)
    return J


def symplectic_defect(F: np.ndarray) -> np.ndarray:
    """``max |F^T J F - J|`` per trajectory."""
    d = F.shape[-1] // 2
    J = symplectic_matrix(d)
    R = np.swapaxes(F, -1, -2) @ J @ F - J
    return np.max(np.abs(R), axis=(-2, -1))


def z_matrix(F: np.ndarray) -> np.ndarray:
    """``Z = (dQ/dq + dP/dp) + i (dP/dq - dQ/dp)`` read from the Jacobian blocks."""
    F = np.asarray(F, dtype=float)
    d = F.shape[-1] // 2
    return (F[..., :d, :d] + F[..., d:, d:]) + 1j * (F[..., d:, :d] - F[..., :d, d:])


def z_dot(dF: np.ndarray) -> np.ndarray:
    """Time derivative of Z given that of F (Z is linear in F)."""
    return z_matrix(dF)


def _inv_small(Z: np.ndarray) -> np.ndarray:
    """Batched inverse; closed form for 1x1 and 2x2."""
    d = Z.shape[-1]
    if d == 1:
        return 1.0 / Z
    if d == 2:
        a, b, c, e = Z[..., 0, 0], Z[..., 0, 1], Z[..., 1, 0], Z[..., 1, 1]
        det = a * e - b * c
        inv = np.empty_like(Z)
        inv[..., 0, 0] = e
        inv[..., 0, 1] = -b
        inv[..., 1, 0] = -c
        inv[..., 1, 1] = a
        return inv / det[..., None, None]
    return np.linalg.inv(Z)


def _cond1(Z: np.ndarray, Zinv: np.ndarray) -> np.ndarray:
    """1-norm condition number ``|Z|_1 |Z^-1|_1``."""
    n1 = lambda M: np.max(np.sum(np.abs(M), axis=-2), axis=-1)
    return n1(Z) * n1(Zinv)


def flow_rhs(state: TrajectoryState, symbols: SymbolSet, check: bool = True) -> FlowDerivative:
    """Evaluate the FGA ODE right-hand sides for every trajectory in ``state``."""
    Q, P, F = state.Q, state.P, state.F
    n, d = Q.shape
    kin = symbols.kinetic
    dQ = kinetic_grad(P, kin)
    dP = -potential_grad(Q, symbols.potential)
    r2 = np.sum(P * P, axis=-1) + kin.delta ** 2
    dS = (1.0 - 1.0 / kin.alpha) * r2 ** (kin.alpha / 2.0) - potential_value(Q, symbols.potential)

    # generator [[0, T''(P)], [-V''(Q), 0]] applied to F
    Tpp = kinetic_hess(P, kin)
    Vqq = potential_hess(Q, symbols.potential)
    dF = np.empty_like(F)
    dF[:, :d, :] = Tpp @ F[:, d:, :]
    dF[:, d:, :] = -Vqq @ F[:, :d, :]

    Z = z_matrix(F)
    with np.errstate(divide="ignore", invalid="ignore"):
        Zinv = _inv_small(Z)
    if check:
        cond = _cond1(Z, Zinv)
        bad = np.flatnonzero(~(cond < Z_COND_MAX))
        if bad.size:
            raise SingularZError(
                f"Z is numerically singular for {bad.size} trajectories (cond >= {Z_COND_MAX:g})", bad)
    Zd = z_dot(dF)
    # tr(Z^-1 Zdot) = sum_ij Zinv_ij Zdot_ji
    dLogA = 0.5 * np.einsum("nij,nji->n", Zinv, Zd)
    return FlowDerivative(dQ=dQ, dP=dP, dS=dS, dF=dF, dLogA=dLogA)


def _advance(state: TrajectoryState, k: FlowDerivative, h: float) -> TrajectoryState:
    return dataclasses.replace(
        state, Q=state.Q + h * k.dQ, P=state.P + h * k.dP, S=state.S + h * k.dS,
        F=state.F + h * k.dF, log_A=state.log_A + h * k.dLogA, t=state.t + h)


def rk4_step(state: TrajectoryState, dt: float, symbols: SymbolSet) -> TrajectoryState:
    """One classical RK4 step for ``(Q, P, S, F, log A)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    k1 = flow_rhs(state, symbols)
    k2 = flow_rhs(_advance(state, k1, 0.5 * dt), symbols)
    k3 = flow_rhs(_advance(state, k2, 0.5 * dt), symbols)
    k4 = flow_rhs(_advance(state, k3, dt), symbols)
    w = dt / 6.0
    new = dataclasses.replace(
        state,
        Q=state.Q + w * (k1.dQ + 2 * k2.dQ + 2 * k3.dQ + k4.dQ),
        P=state.P + w * (k1.dP + 2 * k2.dP + 2 * k3.dP + k4.dP),
        S=state.S + w * (k1.dS + 2 * k2.dS + 2 * k3.dS + k4.dS),
        F=state.F + w * (k1.dF + 2 * k2.dF + 2 * k3.dF + k4.dF),
        log_A=state.log_A + w * (k1.dLogA + 2 * k2.dLogA + 2 * k3.dLogA + k4.dLogA),
        t=state.t + dt,
    )
    new.max_defect = np.maximum(state.max_defect, symplectic_defect(new.F))
    new.min_abs_det_z = np.minimum(state.min_abs_det_z, np.abs(np.linalg.det(z_matrix(new.F))))
    return new


def step_schedule(t_final: float, dt: float) -> list:
    """Fixed steps of size ``dt`` up to ``t_final``; a short final step if needed."""
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    if t_final == 0:
        return []
    n_full = int(np.floor(t_final / dt * (1.0 + 1e-12)))
    steps = [dt] * n_full
    rest = t_final - n_full * dt
    if rest > 1e-12 * max(t_final, dt):
        steps.append(rest)
    return steps


def integrate_trajectory(state: TrajectoryState, t_final: float, dt: float, symbols: SymbolSet,
                         callback=None) -> TrajectoryState:
    """Advance ``state`` by ``t_final`` with fixed RK4 steps.

    ``callback(state)`` is called after the initial state and after every step.
    Failures are re-raised as :class:`TrajectoryError` carrying the labels of
    the trajectories that triggered them.
    """
    state = dataclasses.replace(
        state, max_defect=np.maximum(state.max_defect, symplectic_defect(state.F)),
        min_abs_det_z=np.minimum(state.min_abs_det_z, np.abs(np.linalg.det(z_matrix(state.F)))))
    if callback is not None:
        callback(state)
    for i, h in enumerate(step_schedule(t_final, dt)):
        try:
            state = rk4_step(state, h, symbols)
        except SingularZError as exc:
            labels = [(state.q0[j], state.p0[j]) for j in exc.indices]
            raise TrajectoryError(f"step {i} (t={state.t:.6g}): {exc}", labels, step=i) from exc
        except FloatingPointError as exc:
            bad = getattr(exc, "indices", ())
            labels = [(state.q0[j], state.p0[j]) for j in bad]
            raise TrajectoryError(f"step {i} (t={state.t:.6g}): {exc}", labels, step=i) from exc
        if callback is not None:
            callback(state)
    return state


def hamiltonian(state: TrajectoryState, symbols: SymbolSet) -> np.ndarray:
    return symbols.hamiltonian(state.Q, state.P)
