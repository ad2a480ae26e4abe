"""Discrete FBI transform, its adjoint, phase-space meshes and cutoffs.

The Gaussian-window kernel factorizes over coordinates, so every transform
here is evaluated as a sequence of one-dimensional contractions, one per
axis.  Arrays on a :class:`PhaseMesh` have shape ``(nq_1..nq_d, np_1..np_d)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .grid import Grid, WaveField

__all__ = [
    "PhaseMesh",
    "CutoffSpec",
    "EmptyActiveSetError",
    "window_radius",
    "fbi_minus",
    "fbi_minus_adjoint",
    "fbi_integral",
    "initial_amplitudes",
    "chi_omega",
    "build_phase_mesh",
    "momentum_center",
    "smoothstep5",
]

logger = logging.getLogger(__name__)

# relative Gaussian tail below which kernels are truncated
WINDOW_TAU = 1e-12


class EmptyActiveSetError(ValueError):
    """Every phase-space node was pruned."""


def window_radius(eps: float, tau: float = WINDOW_TAU) -> float:
    """Radius where ``exp(-r^2 / (2 eps))`` drops to ``tau``."""
    return math.sqrt(2.0 * eps * math.log(1.0 / tau))


@dataclass(frozen=True)
class PhaseMesh:
    """Tensor-product lattice of ``(q, p)`` nodes.

    Attributes
    ----------
    q_axes, p_axes : tuple of 1d arrays
        Node coordinates per dimension.
    dq, dp : float
        Spacings (identical in every dimension).
    active : bool array or None
        Mask of shape :attr:`shape`; ``None`` means all nodes active.
    """

    q_axes: Tuple[np.ndarray, ...]
    p_axes: Tuple[np.ndarray, ...]
    dq: float
    dp: float
    active: Optional[np.ndarray] = field(default=None, compare=False)
    pruned_mass: float = 0.0

    def __post_init__(self):
        if not (self.dq > 0 and self.dp > 0):
            raise ValueError("mesh spacings must be positive")
        if len(self.q_axes) != len(self.p_axes):
            raise ValueError("q and p axes must have the same dimension")

    @property
    def dim(self) -> int:
        return len(self.q_axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(a) for a in self.q_axes) + tuple(len(a) for a in self.p_axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return (self.dq * self.dp) ** self.dim

    @property
    def q_box(self):
        return tuple((a[0], a[-1]) for a in self.q_axes)

    @property
    def p_box(self):
        return tuple((a[0], a[-1]) for a in self.p_axes)

    def nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        """All ``(q, p)`` nodes as two ``(N, d)`` arrays in row-major order."""
        grids = np.meshgrid(*self.q_axes, *self.p_axes, indexing="ij")
        d = self.dim
        q = np.stack([g.ravel() for g in grids[:d]], axis=-1)
        p = np.stack([g.ravel() for g in grids[d:]], axis=-1)
        return q, p

    def active_mask(self) -> np.ndarray:
        if self.active is None:
            return np.ones(self.shape, dtype=bool)
        return self.active

    def with_active(self, active, pruned_mass: float = 0.0) -> "PhaseMesh":
        return replace(self, active=np.asarray(active, dtype=bool), pruned_mass=float(pruned_mass))

    def refined(self, factor: int = 2) -> "PhaseMesh":
        """Mesh with spacings divided by ``factor`` over the same boxes."""
        def sub(ax, h):
            n = (len(ax) - 1) * factor + 1
            return ax[0] + np.arange(n) * (h / factor)
        return PhaseMesh(tuple(sub(a, self.dq) for a in self.q_axes),
                         tuple(sub(a, self.dp) for a in self.p_axes),
                         self.dq / factor, self.dp / factor)

    def summary(self) -> dict:
        act = self.active_mask()
        return {"nodes": self.size, "active": int(act.sum()), "pruned_mass": self.pruned_mass,
                "dq": self.dq, "dp": self.dp,
                "q_box": [list(map(float, b)) for b in self.q_box],
                "p_box": [list(map(float, b)) for b in self.p_box]}


def _kernel(q: np.ndarray, p: np.ndarray, x: np.ndarray, eps: float, sign: float,
            radius: Optional[float]) -> np.ndarray:
    """``K[i, j, k] = exp(sign * i p_j (x_k - q_i) / eps - (x_k - q_i)^2 / (2 eps))``."""
    r = x[None, :] - q[:, None]
    env = np.exp(-r * r / (2.0 * eps))
    if radius is not None:
        env[np.abs(r) > radius] = 0.0
    return env[:, None, :] * np.exp((sign * 1j / eps) * p[None, :, None] * r[:, None, :])


def fbi_integral(field: WaveField, mesh: PhaseMesh, eps: float, sign: float = -1.0,
                 radius: Optional[float] = None) -> np.ndarray:
    """Trapezoidal ``int exp(sign i p.(x-q)/eps - |x-q|^2/(2 eps)) psi(x) dx`` on the mesh.

    On a periodic grid the trapezoidal rule is the plain sum times the cell volume.
    """
    d = field.dim
    if mesh.dim != d:
        raise ValueError("mesh and field dimensions differ")
    if radius is None:
        radius = window_radius(eps)
    axes = field.grid.axes
    h = field.grid.spacing
    out = field.values
    # contract y_1 first; the running array keeps processed (q_j, p_j) pairs in front
    for j in range(d):
        K = _kernel(mesh.q_axes[j], mesh.p_axes[j], axes[j], eps, sign, radius) * h[j]
        # out: (pairs..., y_j, y_{j+1}..) ; K: (q_j, p_j, y_j)
        lead = out.shape[: 2 * j]
        rest = out.shape[2 * j + 1:]
        o = out.reshape(int(np.prod(lead, dtype=int)), out.shape[2 * j], int(np.prod(rest, dtype=int)))
        o = np.einsum("ijy,ayb->aijb", K, o, optimize=True)
        out = o.reshape(lead + K.shape[:2] + rest)
    # reorder (q1, p1, q2, p2, ...) -> (q1, q2, ..., p1, p2, ...)
    perm = [2 * j for j in range(d)] + [2 * j + 1 for j in range(d)]
    return np.transpose(out, perm)


def fbi_minus(field: WaveField, mesh: PhaseMesh, eps: float) -> np.ndarray:
    """FBI transform ``2^(-d/2) (pi eps)^(-3d/4) int exp(-i p.(x-q)/eps - |x-q|^2/(2 eps)) psi dx``."""
    field.grid.check_resolves(eps)
    d = field.dim
    pref = 2.0 ** (-d / 2.0) * (math.pi * eps) ** (-3.0 * d / 4.0)
    return pref * fbi_integral(field, mesh, eps, sign=-1.0)


def fbi_minus_adjoint(weights: np.ndarray, mesh: PhaseMesh, eps: float, out_grid: Grid,
                      radius: Optional[float] = None) -> WaveField:
    """Quadrature of the adjoint transform on ``out_grid``.

    ``2^(-d/2) (pi eps)^(-3d/4) sum g(q,p) exp(i p.(x-q)/eps - |x-q|^2/(2 eps)) (dq dp)^d``
    """
    d = mesh.dim
    weights = np.asarray(weights, dtype=complex)
    if weights.shape != mesh.shape:
        raise ValueError(f"weights shape {weights.shape} does not match mesh {mesh.shape}")
    if radius is None:
        radius = window_radius(eps)
    pref = 2.0 ** (-d / 2.0) * (math.pi * eps) ** (-3.0 * d / 4.0) * mesh.cell_volume
    # (q1..qd, p1..pd) -> (q1, p1, q2, p2, ...)
    perm = []
    for j in range(d):
        perm += [j, d + j]
    out = np.transpose(weights, perm)
    axes = out_grid.axes
    for j in range(d):
        G = _kernel(mesh.q_axes[j], mesh.p_axes[j], axes[j], eps, +1.0, radius)
        # out: (x_0..x_{j-1}, q_j, p_j, rest...)
        lead = out.shape[:j]
        rest = out.shape[j + 2:]
        o = out.reshape(int(np.prod(lead, dtype=int)), G.shape[0] * G.shape[1],
                        int(np.prod(rest, dtype=int)))
        o = np.einsum("ak,mab->mkb", G.reshape(-1, G.shape[2]), o, optimize=True)
        out = o.reshape(lead + (G.shape[2],) + rest)
    return WaveField(out_grid, pref * out)


@dataclass(frozen=True)
class CutoffSpec:
    """Phase-space cutoff selection.

    ``mode`` is ``"Off"``, ``"MassThreshold"`` (drop nodes with small ``|A|``)
    or ``"ChiOmega"`` (multiply by a smooth bump on ``K_omega``, then threshold).
    """

    mode: str = "MassThreshold"
    omega: float = 0.0
    stationary_points: tuple = ()

    def __post_init__(self):
        if self.mode not in ("Off", "MassThreshold", "ChiOmega"):
            raise ValueError(f"unknown cutoff mode {self.mode!r}")
        if self.mode == "ChiOmega" and not self.omega > 0:
            raise ValueError("ChiOmega cutoff needs omega > 0")
        object.__setattr__(self, "stationary_points",
                           tuple(tuple(np.atleast_1d(np.asarray(s, dtype=float))) for s in self.stationary_points))


def smoothstep5(s):
    """Quintic smoothstep on [0, 1]: ``6s^5 - 15s^4 + 10s^3`` clipped to [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def chi_omega(q, p, spec: CutoffSpec):
    """Smooth cutoff equal to 1 on ``K_omega`` and 0 outside ``K_{omega/2}``.

    ``K_omega`` is the ball ``|q|^2 + |p|^2 <= 1/omega^2`` with the balls
    ``|p|^2 + |q - q0|^2 < omega^2`` around stationary points ``q0`` removed.
    The outer factor ramps over ``r in [1/omega, 2/omega]`` and each inner
    factor over ``rho in [omega/2, omega]``.
    """
    if spec.mode != "ChiOmega":
        raise ValueError("chi_omega requires mode='ChiOmega'")
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.ndim == 0:
        q = q[None]
    if p.ndim == 0:
        p = p[None]
    w = spec.omega
    r = np.sqrt(np.sum(q * q, axis=-1) + np.sum(p * p, axis=-1))
    val = smoothstep5((2.0 / w - r) / (1.0 / w))
    pp = np.sum(p * p, axis=-1)
    for q0 in spec.stationary_points:
        rho = np.sqrt(pp + np.sum((q - np.asarray(q0)) ** 2, axis=-1))
        val = val * smoothstep5((rho - w / 2.0) / (w / 2.0))
    return val


def momentum_center(field: WaveField, eps: float) -> np.ndarray:
    """Local wave vector ``eps * grad(arg psi)`` at the density peak.

    Uses neighbour phase differences, exact for linear phases whose per-cell
    advance stays below ``pi``.
    """
    v = field.values
    idx = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    pbar = np.zeros(field.dim)
    for ax, h in enumerate(field.grid.spacing):
        fwd = list(idx)
        bwd = list(idx)
        fwd[ax] = (idx[ax] + 1) % v.shape[ax]
        bwd[ax] = (idx[ax] - 1) % v.shape[ax]
        dphi = np.angle(v[tuple(fwd)] * np.conj(v[tuple(bwd)]))
        pbar[ax] = eps * dphi / (2.0 * h)
    return pbar


def _axis(center: float, half_width: float, h: float) -> np.ndarray:
    m = int(math.ceil(half_width / h))
    return center + h * np.arange(-m, m + 1)


def _q_axis(lo: float, hi: float, target: float) -> Tuple[np.ndarray, float]:
    n = int(math.ceil((hi - lo) / target - 1e-12))
    h = (hi - lo) / n
    return lo + h * np.arange(n + 1), h


def build_phase_mesh(field: WaveField, eps: float, dq_factor: float = 0.5,
                     p_center: Optional[Sequence[float]] = None, p_half_width: Optional[float] = None,
                     edge_tol: float = 1e-8, max_grow: int = 8) -> PhaseMesh:
    """Lattice with ``dq ~ dp ~ dq_factor * sqrt(eps)`` sized to the data.

    The q-box is the spatial box (the spacing is shrunk so the lattice hits
    both ends).  The p-box is centred on ``p_center`` (default: the local
    wave vector at the density peak) and widened until ``|F psi|`` on its
    boundary faces is below ``edge_tol`` times the maximum.
    """
    d = field.dim
    target = dq_factor * math.sqrt(eps)
    q_axes = []
    hq = None
    for a, b in field.grid.box:
        ax, hq = _q_axis(a, b, target)
        q_axes.append(ax)
    hp = hq
    pbar = np.asarray(p_center, dtype=float) if p_center is not None else momentum_center(field, eps)
    w = p_half_width if p_half_width is not None else 6.0 * math.sqrt(eps)
    for _ in range(max_grow):
        mesh = PhaseMesh(tuple(q_axes), tuple(_axis(c, w, hp) for c in pbar), hq, hp)
        mag = np.abs(fbi_integral(field, mesh, eps))
        peak = mag.max()
        if peak == 0:
            return mesh
        edge = 0.0
        for j in range(d):
            ax = d + j
            edge = max(edge, np.take(mag, 0, axis=ax).max(), np.take(mag, -1, axis=ax).max())
        if edge < edge_tol * peak:
            return mesh
        w *= 1.5
    logger.warning("p-box did not converge to edge tolerance %g (half width %g)", edge_tol, w)
    return mesh


def initial_amplitudes(psi0: WaveField, mesh: PhaseMesh, eps: float, prune_tol: float = 1e-7,
                       cutoff: CutoffSpec = CutoffSpec()) -> Tuple[np.ndarray, PhaseMesh]:
    """Initial weights ``A(0, q, p)`` and the mesh with its active mask set.

    ``A(0) = 2^(d/2) (2 pi eps)^(-3d/2) int psi0(y) exp(-i p.(y-q)/eps - |y-q|^2/(2 eps)) dy``.
    Inactive nodes carry zero weight.
    """
    psi0.grid.check_resolves(eps, "initial data")
    d = psi0.dim
    A = 2.0 ** (d / 2.0) * (2.0 * math.pi * eps) ** (-1.5 * d) * fbi_integral(psi0, mesh, eps)
    if cutoff.mode == "ChiOmega":
        q, p = mesh.nodes()
        A = A * chi_omega(q, p, cutoff).reshape(mesh.shape)
    mag = np.abs(A)
    peak = mag.max()
    if cutoff.mode == "Off":
        active = mag > 0
    else:
        active = mag > prune_tol * peak
    if not active.any():
        raise EmptyActiveSetError("no phase-space node carries weight; check the phase-space box")
    A = np.where(active, A, 0.0)
    dropped = pruned_mass_fraction(mag, active)
    mesh = mesh.with_active(active, dropped)
    logger.info("phase mesh: %d nodes, %d active, pruned mass fraction %.3e",
                mesh.size, int(active.sum()), dropped)
    return A, mesh


def pruned_mass_fraction(A_full: np.ndarray, active: np.ndarray) -> float:
    mag2 = np.abs(A_full) ** 2
    return float(mag2[~active].sum() / mag2.sum())
