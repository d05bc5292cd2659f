"""Conserved quantities of gradient flows and gradient-equivariance checks.

States are numpy arrays or tuples of arrays (one per layer, first layer
first).  Layer indices in the public API are 1-based: ``state[i - 1]`` is
layer ``i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .relu_loss import LossProblem, mc_loss, mc_loss_and_grad, sample_batch

__all__ = [
    "FlowTrajectory",
    "ConservedQuantity",
    "gradient_flow",
    "phi_scalar",
    "phi_matrix",
    "InvariancePremiseError",
    "check_scaling_premise",
    "check_gl_premise",
    "ConservationResult",
    "check_conservation",
    "drift_scaling",
    "EquivarianceReport",
    "check_equivariance",
    "averaging_projector",
]


def _flat_norm(x) -> float:
    if isinstance(x, np.ndarray):
        return float(np.linalg.norm(x))
    return math.sqrt(sum(float(np.sum(a * a)) for a in x))


def _axpy(x, g, h):
    if isinstance(x, np.ndarray):
        return x - h * g
    return tuple(a - h * b for a, b in zip(x, g))


def _finite(x) -> bool:
    if isinstance(x, np.ndarray):
        return bool(np.isfinite(x).all())
    return all(np.isfinite(a).all() for a in x)


@dataclass
class FlowTrajectory:
    times: np.ndarray
    states: list
    step: float
    function_id: str = ""

    def __post_init__(self):
        if len(self.times) > 1:
            dt = np.diff(self.times)
            if not (dt > 0).all():
                raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.states)


def gradient_flow(grad_fn: Callable, x0, step: float, n_steps: int, record_every: int = 1,
                  function_id: str = "") -> FlowTrajectory:
    """Explicit Euler: ``x_{t+1} = x_t - step * grad_fn(x_t)``."""
    if not step > 0:
        raise ValueError("step must be positive")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    x = x0.copy() if isinstance(x0, np.ndarray) else tuple(np.array(a, float) for a in x0)
    times, states = [0.0], [x]
    for t in range(1, n_steps + 1):
        x = _axpy(x, grad_fn(x), step)
        if not _finite(x):
            raise FloatingPointError(f"non-finite state at step {t}")
        if t % record_every == 0 or t == n_steps:
            times.append(t * step)
            states.append(x)
    return FlowTrajectory(np.array(times), states, step, function_id)


def _layer(state, i: int) -> np.ndarray:
    if isinstance(state, np.ndarray):
        state = (state,)
    if not 1 <= i <= len(state):
        raise IndexError(f"layer {i} out of range 1..{len(state)}")
    return np.asarray(state[i - 1], float)


def phi_scalar(state, i: int, j: int) -> float:
    """``(|v_i|^2 - |v_j|^2) / 2`` with Frobenius norms."""
    a, b = _layer(state, i), _layer(state, j)
    return 0.5 * (float(np.sum(a * a)) - float(np.sum(b * b)))


def phi_matrix(state, i: int) -> np.ndarray:
    """``(W_i W_i^T - W_{i+1}^T W_{i+1}) / 2``, symmetric of the inner width."""
    Wi, Wn = _layer(state, i), _layer(state, i + 1)
    if Wn.shape[1] != Wi.shape[0]:
        raise ValueError(f"layer shapes {Wi.shape} and {Wn.shape} do not chain")
    M = 0.5 * (Wi @ Wi.T - Wn.T @ Wn)
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class ConservedQuantity:
    kind: str  # scalar_balance | matrix_balance
    i: int
    j: int | None = None

    def __post_init__(self):
        if self.kind not in ("scalar_balance", "matrix_balance"):
            raise ValueError(f"unknown quantity kind {self.kind!r}")
        if self.kind == "scalar_balance" and self.j is None:
            raise ValueError("scalar_balance needs two layer indices")

    @classmethod
    def scalar(cls, i: int, j: int) -> ConservedQuantity:
        return cls("scalar_balance", i, j)

    @classmethod
    def matrix(cls, i: int) -> ConservedQuantity:
        return cls("matrix_balance", i)

    def __call__(self, state):
        if self.kind == "scalar_balance":
            return phi_scalar(state, self.i, self.j)
        return phi_matrix(state, self.i)

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))

    def to_json(self) -> dict:
        out = {"kind": self.kind, "i": self.i}
        if self.j is not None:
            out["j"] = self.j
        return out


class InvariancePremiseError(ValueError):
    """The loss lacks the symmetry that the conserved quantity relies on."""


def _relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a))


def check_scaling_premise(problem: LossProblem, state, X, i: int, j: int, c: float = 2.0,
                          tol: float = 1e-12) -> float:
    """Scale layer i by c and layer j by 1/c; the loss on X must not move."""
    ws = list(problem.student.check(state))
    base = mc_loss(problem, tuple(ws), X)
    ws[i - 1] = c * ws[i - 1]
    ws[j - 1] = ws[j - 1] / c
    gap = _relative_gap(base, mc_loss(problem, tuple(ws), X))
    if gap > tol:
        raise InvariancePremiseError(
            f"loss changes by {gap:.3g} under layer rescaling ({i}: x{c}, {j}: x1/{c}); "
            "the activation must be positively homogeneous between these layers")
    return gap


def check_gl_premise(problem: LossProblem, state, X, i: int, seed: int = 0, tol: float = 1e-10) -> float:
    """Replace (W_i, W_{i+1}) by (A W_i, W_{i+1} A^-1) for a random well-conditioned A."""
    ws = list(problem.student.check(state))
    base = mc_loss(problem, tuple(ws), X)
    n = ws[i - 1].shape[0]
    rng = np.random.default_rng(seed)
    A = np.eye(n) + 0.3 * rng.standard_normal((n, n)) / math.sqrt(n)
    ws[i - 1] = A @ ws[i - 1]
    ws[i] = ws[i] @ np.linalg.inv(A)
    gap = _relative_gap(base, mc_loss(problem, tuple(ws), X))
    if gap > tol:
        raise InvariancePremiseError(f"loss changes by {gap:.3g} under W_i -> A W_i, W_(i+1) -> W_(i+1) A^-1; "
                                     "needs a linear activation between these layers")
    return gap


@dataclass
class ConservationResult:
    max_drift: float
    times: np.ndarray
    drift: np.ndarray
    step: float
    n_steps: int
    premise_gap: float
    quantity: ConservedQuantity
    loss_start: float = math.nan
    loss_end: float = math.nan

    def to_json(self) -> dict:
        return {"quantity": self.quantity.to_json(), "step": self.step, "n_steps": self.n_steps,
                "horizon": self.step * self.n_steps, "max_drift": self.max_drift,
                "premise_gap": self.premise_gap, "loss_start": self.loss_start, "loss_end": self.loss_end}


def check_conservation(problem: LossProblem, quantity: ConservedQuantity, x0, step: float, n_steps: int,
                       n_samples: int = 2000, seed: int = 0, record_every: int = 1) -> ConservationResult:
    """Euler-integrate the gradient flow of the loss on a fixed sample and track the drift of Phi.

    The symmetry behind Phi holds sample by sample, so the empirical loss on
    any fixed batch conserves Phi exactly in continuous time.
    """
    X = sample_batch(problem.distribution, n_samples, seed)
    x0 = tuple(problem.student.check(x0))
    if quantity.kind == "scalar_balance":
        gap = 0.0 if quantity.i == quantity.j else check_scaling_premise(problem, x0, X, quantity.i, quantity.j)
    else:
        gap = check_gl_premise(problem, x0, X, quantity.i)

    def grad_fn(x):
        return mc_loss_and_grad(problem, x, X)[1]

    traj = gradient_flow(grad_fn, x0, step, n_steps, record_every, function_id="mc_loss")
    phi0 = quantity(x0)
    drift = np.array([quantity.distance(quantity(s), phi0) for s in traj.states])
    return ConservationResult(float(drift.max()), traj.times, drift, step, n_steps, gap, quantity,
                              mc_loss(problem, x0, X), mc_loss(problem, traj.states[-1], X))


def drift_scaling(problem: LossProblem, quantity: ConservedQuantity, x0, steps: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
                  horizon: float = 1.0, n_samples: int = 2000, seed: int = 0) -> dict:
    """Max drift at each step size over the same horizon, plus consecutive ratios."""
    drifts = []
    for h in steps:
        n = int(round(horizon / h))
        drifts.append(check_conservation(problem, quantity, x0, h, n, n_samples, seed, record_every=1).max_drift)
    ratios = [drifts[k + 1] / drifts[k] if drifts[k] > 0 else 0.0 for k in range(len(drifts) - 1)]
    return {"steps": list(steps), "horizon": horizon, "drifts": drifts, "ratios": ratios}


@dataclass
class EquivarianceReport:
    max_residual: float
    max_tangency_residual: float | None
    n_checks: int
    tol: float
    residuals: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        t = self.max_tangency_residual
        return self.max_residual <= self.tol and (t is None or t <= self.tol)


def averaging_projector(group: Sequence[Callable]) -> Callable:
    """Orthogonal projection onto the fixed subspace of a finite group of orthogonal maps."""
    group = list(group)

    def P(x):
        return sum(g(x) for g in group) / len(group)

    return P


def check_equivariance(grad_fn: Callable, group_elems: Sequence[Callable], samples: Sequence, tol: float = 1e-10,
                       subgroup: Sequence[Callable] | None = None) -> EquivarianceReport:
    """Residuals ``|grad(g x) - g grad(x)|`` over all (g, x) pairs.

    With ``subgroup`` (a complete finite group of orthogonal maps) each sample is
    first projected onto its fixed subspace E^H, and the component of the
    gradient there orthogonal to E^H is also measured.
    """
    res = []
    for x in samples:
        gx = grad_fn(x)
        for g in group_elems:
            res.append(float(np.linalg.norm(grad_fn(g(x)) - g(gx))))
    tang = None
    if subgroup is not None:
        P = averaging_projector(subgroup)
        tang = 0.0
        for x in samples:
            xh = P(x)
            gr = grad_fn(xh)
            tang = max(tang, float(np.linalg.norm(gr - P(gr))))
    return EquivarianceReport(max(res) if res else 0.0, tang, len(res), tol, res)
