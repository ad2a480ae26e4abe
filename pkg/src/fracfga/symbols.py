"""Kinetic and potential symbols of the regularized fractional Hamiltonian.

The kinetic symbol is ``T(p) = |p|**alpha / alpha``; its regularized form
replaces ``|p|`` by ``sqrt(|p|**2 + delta**2)``.  All evaluators accept
arrays with a trailing dimension axis, ``p.shape == (..., d)``, so that a
whole ensemble of trajectories can be evaluated in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "KineticModel",
    "PotentialModel",
    "SymbolSet",
    "SingularSymbolError",
    "DimensionError",
    "kinetic_value",
    "kinetic_grad",
    "kinetic_hess",
    "potential_value",
    "potential_grad",
    "potential_hess",
    "POTENTIAL_KINDS",
]


class SingularSymbolError(ValueError):
    """Raised when the kinetic Hessian is requested at the unregularized origin."""


class DimensionError(ValueError):
    """Raised when a potential is evaluated in a dimension it does not support."""


@dataclass(frozen=True)
class KineticModel:
    """Regularized fractional kinetic symbol.

    Parameters
    ----------
    alpha : float
        Fractional order, ``1 < alpha <= 2``.
    delta : float
        Regularization, ``delta >= 0``.
    """

    alpha: float
    delta: float = 0.0

    def __post_init__(self):
        if not (1.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (1, 2], got {self.alpha}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")

    def value(self, p):
        return kinetic_value(p, self)

    def grad(self, p):
        return kinetic_grad(p, self)

    def hess(self, p):
        return kinetic_hess(p, self)


def _sq(p: np.ndarray, delta: float) -> np.ndarray:
    return np.sum(p * p, axis=-1) + delta * delta


def kinetic_value(p, model: KineticModel):
    """``(|p|^2 + delta^2)^(alpha/2) / alpha``."""
    p = np.asarray(p, dtype=float)
    r2 = _sq(p, model.delta)
    return r2 ** (model.alpha / 2.0) / model.alpha


def kinetic_grad(p, model: KineticModel):
    """Gradient ``(|p|^2 + delta^2)^((alpha-2)/2) p``.

    At the unregularized origin the limit (zero) is returned.
    """
    p = np.asarray(p, dtype=float)
    r2 = _sq(p, model.delta)
    if model.alpha == 2.0:
        return p.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(r2 > 0.0, r2, 1.0) ** ((model.alpha - 2.0) / 2.0)
    s = np.where(r2 > 0.0, s, 0.0)
    return s[..., None] * p


def kinetic_hess(p, model: KineticModel):
    """Hessian ``s I + (alpha-2) (|p|^2+delta^2)^((alpha-4)/2) p p^T``.

    Here ``s = (|p|^2+delta^2)^((alpha-2)/2)``.  Undefined (raises
    :class:`SingularSymbolError`) at ``p = 0`` when ``delta = 0`` and
    ``alpha < 2``.
    """
    p = np.asarray(p, dtype=float)
    d = p.shape[-1]
    eye = np.eye(d)
    if model.alpha == 2.0:
        return np.broadcast_to(eye, p.shape[:-1] + (d, d)).copy()
    r2 = _sq(p, model.delta)
    if np.any(r2 == 0.0):
        raise SingularSymbolError(
            "kinetic Hessian is singular at p = 0 without regularization")
    s = r2 ** ((model.alpha - 2.0) / 2.0)
    c = (model.alpha - 2.0) * r2 ** ((model.alpha - 4.0) / 2.0)
    outer = p[..., :, None] * p[..., None, :]
    return s[..., None, None] * eye + c[..., None, None] * outer


POTENTIAL_KINDS = ("Zero", "Harmonic1DShifted", "Cosine1D", "Harmonic2DShifted", "Custom")


@dataclass(frozen=True)
class PotentialModel:
    """Closed-form potential with analytic gradient and Hessian.

    Parameters
    ----------
    kind : str
        One of ``Zero``, ``Harmonic1DShifted``, ``Cosine1D``,
        ``Harmonic2DShifted`` or ``Custom``.
    parameters : sequence of float
        ``Harmonic1DShifted``: ``(c,)`` or ``(c, k)`` for ``V = k (x-c)^2 / 2``.
        ``Cosine1D``: ``()`` or ``(a, b, k)`` for ``V = a + b cos(k x)``;
        defaults to ``1 + cos(pi x)``.
        ``Harmonic2DShifted``: ``(c1, c2)``.
    dim : int, optional
        Dimension for ``Zero`` and ``Custom``.
    value_fn, grad_fn, hess_fn : callable, optional
        Evaluators for ``Custom``; vectorized over leading axes.
    grad_bound_value : float, optional
        ``sup |grad V|`` for ``Custom`` (``inf`` if unknown).
    """

    kind: str
    parameters: tuple = ()
    dim: Optional[int] = None
    value_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    grad_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    hess_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    grad_bound_value: float = math.inf

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        object.__setattr__(self, "parameters", tuple(float(v) for v in self.parameters))
        if self.kind == "Custom" and None in (self.value_fn, self.grad_fn, self.hess_fn):
            raise ValueError("Custom potential needs value_fn, grad_fn and hess_fn")
        if self.kind == "Harmonic2DShifted" and len(self.parameters) not in (0, 2):
            raise ValueError("Harmonic2DShifted takes the center (c1, c2)")

    @classmethod
    def from_name(cls, name: str, parameters: Sequence[float] = (), dim: Optional[int] = None):
        return cls(kind=name, parameters=tuple(parameters), dim=dim)

    @property
    def supported_dim(self) -> Optional[int]:
        if self.kind in ("Harmonic1DShifted", "Cosine1D"):
            return 1
        if self.kind == "Harmonic2DShifted":
            return 2
        return self.dim

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x[None]
        need = self.supported_dim
        if need is not None and x.shape[-1] != need:
            raise DimensionError(
                f"{self.kind} potential is {need}-dimensional, got points of dimension {x.shape[-1]}")
        return x

    def _cos_params(self):
        if self.parameters:
            return self.parameters
        return (1.0, 1.0, math.pi)

    def _harm_params(self):
        if self.kind == "Harmonic1DShifted":
            c = self.parameters[0] if self.parameters else 0.0
            k = self.parameters[1] if len(self.parameters) > 1 else 1.0
            return np.array([c]), k
        c = np.array(self.parameters) if self.parameters else np.ones(2)
        return c, 1.0

    def value(self, x):
        return potential_value(x, self)

    def grad(self, x):
        return potential_grad(x, self)

    def hess(self, x):
        return potential_hess(x, self)

    def grad_bound(self) -> float:
        """Global bound on ``|grad V|`` (``inf`` for unbounded forces)."""
        if self.kind == "Zero":
            return 0.0
        if self.kind == "Cosine1D":
            _, b, k = self._cos_params()
            return abs(b * k)
        if self.kind == "Custom":
            return self.grad_bound_value
        return math.inf

    def stationary_points(self, box=None) -> list:
        """Points with ``grad V = 0`` (inside ``box`` for periodic kinds)."""
        if self.kind in ("Harmonic1DShifted", "Harmonic2DShifted"):
            return [self._harm_params()[0]]
        if self.kind == "Cosine1D":
            _, _, k = self._cos_params()
            lo, hi = box[0] if box is not None else (-1.0, 1.0)
            n0, n1 = math.floor(lo * k / math.pi), math.ceil(hi * k / math.pi)
            return [np.array([n * math.pi / k]) for n in range(n0, n1 + 1)
                    if lo <= n * math.pi / k <= hi]
        return []


def potential_value(x, model: PotentialModel):
    x = model._check(x)
    kind = model.kind
    if kind == "Zero":
        return np.zeros(x.shape[:-1])
    if kind == "Cosine1D":
        a, b, k = model._cos_params()
        return a + b * np.cos(k * x[..., 0])
    if kind in ("Harmonic1DShifted", "Harmonic2DShifted"):
        c, k = model._harm_params()
        y = x - c
        return 0.5 * k * np.sum(y * y, axis=-1)
    return np.asarray(model.value_fn(x), dtype=float)


def potential_grad(x, model: PotentialModel):
    x = model._check(x)
    kind = model.kind
    if kind == "Zero":
        return np.zeros_like(x)
    if kind == "Cosine1D":
        _, b, k = model._cos_params()
        return -b * k * np.sin(k * x)
    if kind in ("Harmonic1DShifted", "Harmonic2DShifted"):
        c, k = model._harm_params()
        return k * (x - c)
    return np.asarray(model.grad_fn(x), dtype=float)


def potential_hess(x, model: PotentialModel):
    x = model._check(x)
    kind = model.kind
    d = x.shape[-1]
    if kind == "Zero":
        return np.zeros(x.shape + (d,))
    if kind == "Cosine1D":
        _, b, k = model._cos_params()
        return (-b * k * k * np.cos(k * x))[..., None]
    if kind in ("Harmonic1DShifted", "Harmonic2DShifted"):
        _, k = model._harm_params()
        return np.broadcast_to(k * np.eye(d), x.shape[:-1] + (d, d)).copy()
    return np.asarray(model.hess_fn(x), dtype=float)


@dataclass(frozen=True)
class SymbolSet:
    """Kinetic plus potential symbol, ``H(Q, P) = T_delta(P) + V(Q)``."""

    kinetic: KineticModel
    potential: PotentialModel

    def hamiltonian(self, Q, P):
        return kinetic_value(P, self.kinetic) + potential_value(Q, self.potential)
