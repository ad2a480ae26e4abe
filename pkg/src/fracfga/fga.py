"""Frozen Gaussian approximation: decompose, propagate, reconstruct."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .config import RunConfig
from .fbi import CutoffSpec, PhaseMesh, build_phase_mesh, initial_amplitudes, window_radius
from .flow import TrajectoryError, TrajectoryState, initial_state, integrate_trajectory
from .grid import Grid, WaveField

__all__ = ["FgaSolution", "StageError", "decompose", "propagate", "reconstruct", "solve",
           "worker_count", "output_grid"]

logger = logging.getLogger(__name__)

WORKERS_ENV = "FRACFGA_WORKERS"
# trajectories per propagation task / reconstruction block
CHUNK = 4096


class StageError(RuntimeError):
    """Failure in one FGA stage; ``stage`` is ``decompose``, ``propagate`` or ``reconstruct``."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class FgaSolution:
    field: WaveField
    trajectories: TrajectoryState
    mesh: PhaseMesh
    diagnostics: dict = field(default_factory=dict)


def worker_count(requested: Optional[int] = None) -> int:
    if requested:
        return int(requested)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def output_grid(config: RunConfig) -> Grid:
    """x-grid with spacing ``eps`` on the example box."""
    return Grid.uniform(config.box, config.eps)


def cutoff_spec(config: RunConfig) -> CutoffSpec:
    if config.cutoff == "ChiOmega":
        pts = config.potential_model().stationary_points(config.box)
        return CutoffSpec("ChiOmega", config.omega, tuple(pts))
    return CutoffSpec(config.cutoff, config.omega)


def decompose(psi0: WaveField, config: RunConfig, mesh: Optional[PhaseMesh] = None):
    """One trajectory per active phase-space node, with ``A = A(0, q, p)``.

    Returns ``(trajectories, mesh)``; trajectories are ordered by flat node index.
    """
    eps = config.eps
    if mesh is None:
        mesh = build_phase_mesh(psi0, eps, dq_factor=config.dq_factor)
    A, mesh = initial_amplitudes(psi0, mesh, eps, prune_tol=config.prune_tol,
                                 cutoff=cutoff_spec(config))
    q, p = mesh.nodes()
    idx = np.flatnonzero(mesh.active_mask().ravel())
    trajs = initial_state(q[idx], p[idx], A.ravel()[idx])
    return trajs, mesh


def _chunks(n: int, size: int = CHUNK):
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def propagate(trajs: TrajectoryState, config: RunConfig, workers: Optional[int] = None) -> TrajectoryState:
    """Integrate every trajectory to ``config.final_time``.

    Blocks of trajectories run on a thread pool; each block is independent
    and the results are concatenated in the original order.
    """
    symbols = config.symbols()
    t_final, dt = config.final_time, config.dt_fga
    parts = _chunks(len(trajs))
    if not parts:
        return trajs

    def run(sl):
        return integrate_trajectory(trajs.take(sl), t_final, dt, symbols)

    nw = min(worker_count(workers or config.workers), len(parts))
    failures = []
    results = []
    if nw == 1:
        for sl in parts:
            try:
                results.append(run(sl))
            except TrajectoryError as exc:
                failures.append(exc)
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            futures = [pool.submit(run, sl) for sl in parts]
            for fut in futures:
                try:
                    results.append(fut.result())
                except TrajectoryError as exc:
                    failures.append(exc)
    if failures:
        labels = [lab for exc in failures for lab in exc.labels]
        raise TrajectoryError(f"{len(labels)} trajectories failed: {failures[0]}", labels)
    out = TrajectoryState.concatenate(results)
    out.t = t_final
    return out


def reconstruct(trajs: TrajectoryState, out_grid: Grid, eps: float, mesh: PhaseMesh,
                radius: Optional[float] = None) -> WaveField:
    """Sum of frozen Gaussians weighted by ``A exp(iS/eps) (dq dp)^d`` on ``out_grid``.

    Each Gaussian factorizes over coordinates; it is zeroed where any
    ``|x_j - Q_j|`` exceeds ``radius`` (a box containing the ball of that
    radius).  Blocks of trajectories are summed in index order.
    """
    out_grid.check_resolves(eps, "output")
    d = out_grid.dim
    if radius is None:
        radius = window_radius(eps)
    axes = out_grid.axes
    total = np.zeros(out_grid.n, dtype=complex)
    coef_all = trajs.A * np.exp(1j * trajs.S / eps) * mesh.cell_volume
    for sl in _chunks(len(trajs)):
        Q, P, c = trajs.Q[sl], trajs.P[sl], coef_all[sl]
        factors = []
        for j in range(d):
            r = axes[j][None, :] - Q[:, j, None]
            g = np.exp((1j / eps) * P[:, j, None] * r - r * r / (2.0 * eps))
            g[np.abs(r) > radius] = 0.0
            factors.append(g)
        if d == 1:
            total += c @ factors[0]
        else:
            total += (factors[0] * c[:, None]).T @ factors[1]
    return WaveField(out_grid, total)


def solve(psi0: WaveField, config: RunConfig, mesh: Optional[PhaseMesh] = None,
          out_grid: Optional[Grid] = None) -> FgaSolution:
    """Decompose, propagate and reconstruct ``psi0`` at ``config.final_time``."""
    eps = config.eps
    if out_grid is None:
        out_grid = psi0.grid
    try:
        trajs, mesh = decompose(psi0, config, mesh)
    except Exception as exc:
        raise StageError("decompose", exc) from exc
    try:
        final = propagate(trajs, config)
    except Exception as exc:
        raise StageError("propagate", exc) from exc
    try:
        psi = reconstruct(final, out_grid, eps, mesh)
    except Exception as exc:
        raise StageError("reconstruct", exc) from exc
    diag = {
        "n_trajectories": len(final),
        "max_symplectic_defect": float(final.max_defect.max()) if len(final) else 0.0,
        "min_abs_det_z": float(final.min_abs_det_z.min()) if len(final) else math.inf,
        "pruned_mass_fraction": mesh.pruned_mass,
        "mesh": mesh.summary(),
    }
    logger.info("FGA: %(n_trajectories)d trajectories, min|det Z|=%(min_abs_det_z).4f, "
                "max symplectic defect=%(max_symplectic_defect).2e", diag)
    return FgaSolution(psi, final, mesh, diag)
