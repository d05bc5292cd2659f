"""Teacher-student squared losses for two-layer and multilayer networks.

Two-layer model: ``x -> 1^T phi(W x)`` with ``W`` of shape (k, d).  Multilayer
model: ``x -> W_N phi(W_{N-1} ... phi(W_1 x))`` with ``W_N`` a single row.
No biases anywhere.

The ReLU derivative at 0 is taken to be 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .perm_core import Permutation, permutation_matrix

__all__ = [
    "ActivationSpec",
    "DistributionSpec",
    "NetworkSpec",
    "LossProblem",
    "forward",
    "sample_batch",
    "mc_loss",
    "mc_grad",
    "mc_loss_and_grad",
    "mc_loss_with_se",
    "arccos_kernel",
    "analytic_loss_gaussian",
    "analytic_grad_gaussian",
    "InvarianceReport",
    "verify_invariance",
    "teacher_identity",
    "teacher_block_scaled",
    "problem_from_config",
]


@dataclass(frozen=True)
class ActivationSpec:
    kind: str = "relu"
    slope: float = 0.01
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("relu", "leaky_relu", "softplus", "linear"):
            raise ValueError(f"unknown activation {self.kind!r}")
        if self.kind == "leaky_relu" and not 0 < self.slope < 1:
            raise ValueError("leaky slope must lie in (0, 1)")
        if self.kind == "softplus" and self.beta <= 0:
            raise ValueError("softplus beta must be positive")

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "relu":
            return np.maximum(z, 0.0)
        if self.kind == "leaky_relu":
            return np.where(z > 0, z, self.slope * z)
        if self.kind == "softplus":
            bz = self.beta * z
            return (np.maximum(bz, 0) + np.log1p(np.exp(-np.abs(bz)))) / self.beta
        return z

    def derivative(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "relu":
            return (z > 0).astype(float)
        if self.kind == "leaky_relu":
            return np.where(z > 0, 1.0, self.slope)
        if self.kind == "softplus":
            return 0.5 * (1 + np.tanh(0.5 * self.beta * z))
        return np.ones_like(z)

    def positively_homogeneous(self) -> bool:
        return self.kind in ("relu", "leaky_relu", "linear")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "leaky_relu":
            out["slope"] = self.slope
        if self.kind == "softplus":
            out["beta"] = self.beta
        return out


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """``gaussian`` (zero mean, SPD covariance) or ``uniform_box`` on [lo, hi]."""

    kind: str
    dim: int
    cov: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    _chol: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def gaussian(cls, d: int, cov=None) -> DistributionSpec:
        if cov is None:
            return cls("gaussian", d)
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 1:
            cov = np.diag(cov)
        if cov.shape != (d, d) or not np.allclose(cov, cov.T):
            raise ValueError("covariance must be a symmetric d x d matrix")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None
        return cls("gaussian", d, cov=cov, _chol=chol)

    @classmethod
    def uniform_box(cls, lo, hi, d: int | None = None) -> DistributionSpec:
        lo, hi = np.atleast_1d(np.asarray(lo, float)), np.atleast_1d(np.asarray(hi, float))
        if d is not None:
            lo, hi = np.broadcast_to(lo, (d,)).copy(), np.broadcast_to(hi, (d,)).copy()
        if lo.shape != hi.shape or not (lo < hi).all():
            raise ValueError("uniform box needs lo < hi componentwise")
        return cls("uniform_box", len(lo), lo=lo, hi=hi)

    @property
    def is_standard_gaussian(self) -> bool:
        return self.kind == "gaussian" and (self.cov is None or np.array_equal(self.cov, np.eye(self.dim)))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be positive")
        if self.kind == "gaussian":
            Z = rng.standard_normal((n, self.dim))
            return Z if self._chol is None else Z @ self._chol.T
        U = rng.random((n, self.dim))
        return self.lo + U * (self.hi - self.lo)

    def is_invariant_under(self, U: np.ndarray, atol: float = 1e-12) -> bool:
        """Whether ``x ~ D`` implies ``U x ~ D``."""
        U = np.asarray(U, float)
        if self.kind == "gaussian":
            if not np.allclose(U @ U.T, np.eye(self.dim), atol=1e-10):
                return False
            cov = np.eye(self.dim) if self.cov is None else self.cov
            return bool(np.allclose(U @ cov @ U.T, cov, atol=atol))
        # a box maps to itself only under signed permutations
        absU = np.abs(U)
        if not (np.isclose(absU, 0) | np.isclose(absU, 1)).all() or not np.allclose(absU.sum(0), 1):
            return False
        lo = U @ self.lo
        hi = U @ self.hi
        return bool(np.allclose(np.minimum(lo, hi), self.lo) and np.allclose(np.maximum(lo, hi), self.hi))

    def to_json(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "dim": self.dim,
                    "cov": None if self.cov is None else self.cov.tolist()}
        return {"kind": "uniform_box", "dim": self.dim, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True)
class NetworkSpec:
    """``layer_dims = (d, k)`` with a fixed ``1^T`` readout, or ``(d_0, ..., d_N = 1)``."""

    layer_dims: tuple[int, ...]
    activation: ActivationSpec = ActivationSpec()
    second_layer_fixed: bool = True

    def __post_init__(self):
        dims = tuple(int(x) for x in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if any(x < 1 for x in dims):
            raise ValueError("all layer dims must be >= 1")
        if self.second_layer_fixed and len(dims) != 2:
            raise ValueError("two-layer mode takes layer_dims = (d, k)")
        if not self.second_layer_fixed and (len(dims) < 2 or dims[-1] != 1):
            raise ValueError("multilayer mode needs d_N = 1")

    @classmethod
    def two_layer(cls, d: int, k: int, activation: ActivationSpec | str = "relu") -> NetworkSpec:
        act = activation if isinstance(activation, ActivationSpec) else ActivationSpec(activation)
        return cls((d, k), act, True)

    @classmethod
    def multilayer(cls, dims: Sequence[int], activation: ActivationSpec | str = "relu") -> NetworkSpec:
        act = activation if isinstance(activation, ActivationSpec) else ActivationSpec(activation)
        return cls(tuple(dims), act, False)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def weight_shapes(self) -> list[tuple[int, int]]:
        dims = self.layer_dims
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    def check(self, weights) -> list[np.ndarray]:
        ws = [np.asarray(weights, float)] if self.second_layer_fixed else [np.asarray(w, float) for w in weights]
        shapes = [w.shape for w in ws]
        if shapes != self.weight_shapes():
            raise ValueError(f"weight shapes {shapes} do not match {self.weight_shapes()}")
        return ws


@dataclass(frozen=True, eq=False)
class LossProblem:
    """Student architecture, teacher weights and input distribution.

    For the two-layer model the teacher is evaluated as ``1^T phi(V x)``;
    for the multilayer model it is a tuple of matrices in the student's
    layer format (shapes may differ from the student's hidden widths).
    """

    student: NetworkSpec
    teacher: object
    distribution: DistributionSpec

    def __post_init__(self):
        if self.distribution.dim != self.student.input_dim:
            raise ValueError("distribution dimension does not match the student input")

    @property
    def teacher_net(self) -> NetworkSpec:
        act = self.student.activation
        if self.student.second_layer_fixed:
            V = np.asarray(self.teacher, float)
            return NetworkSpec((V.shape[1], V.shape[0]), act, True)
        dims = [np.asarray(self.teacher[0]).shape[1]] + [np.asarray(v).shape[0] for v in self.teacher]
        return NetworkSpec(tuple(dims), act, False)


def _forward_batch(net: NetworkSpec, ws: list[np.ndarray], X: np.ndarray):
    """Outputs (n,) plus pre-activations and activations needed by backprop."""
    phi = net.activation
    if net.second_layer_fixed:
        Z = X @ ws[0].T
        return phi(Z).sum(axis=1), [Z], [X]
    pre, acts = [], [X]
    A = X
    for W in ws[:-1]:
        Z = A @ W.T
        pre.append(Z)
        A = phi(Z)
        acts.append(A)
    return (A @ ws[-1].T)[:, 0], pre, acts


def forward(net: NetworkSpec, weights, x) -> float | np.ndarray:
    """Network output for one input vector (scalar) or a batch of rows (vector)."""
    ws = net.check(weights)
    x = np.asarray(x, float)
    if x.shape[-1] != net.input_dim:
        raise ValueError("input dimension mismatch")
    out, _, _ = _forward_batch(net, ws, np.atleast_2d(x))
    return float(out[0]) if x.ndim == 1 else out


def sample_batch(dist: DistributionSpec, n: int, seed) -> np.ndarray:
    """``n`` rows from ``dist``; ``seed`` is an int, SeedSequence or Generator (numpy PCG64)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return dist.sample(n, rng)


def _residual(problem: LossProblem, ws, X):
    out, pre, acts = _forward_batch(problem.student, ws, X)
    tnet = problem.teacher_net
    target, _, _ = _forward_batch(tnet, tnet.check(problem.teacher), X)
    return out - target, pre, acts


def mc_loss(problem: LossProblem, weights, batch: np.ndarray) -> float:
    ws = problem.student.check(weights)
    r, _, _ = _residual(problem, ws, batch)
    return 0.5 * float(np.mean(r * r))


def mc_loss_with_se(problem: LossProblem, weights, batch: np.ndarray) -> tuple[float, float]:
    """Empirical loss and its standard error."""
    ws = problem.student.check(weights)
    r, _, _ = _residual(problem, ws, batch)
    vals = 0.5 * r * r
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def mc_loss_and_grad(problem: LossProblem, weights, batch: np.ndarray):
    """Empirical loss and its gradient, shaped like ``weights``."""
    net = problem.student
    ws = net.check(weights)
    r, pre, acts = _residual(problem, ws, batch)
    n = len(batch)
    loss = 0.5 * float(np.mean(r * r))
    dphi = net.activation.derivative
    if net.second_layer_fixed:
        delta = r[:, None] * dphi(pre[0])
        return loss, delta.T @ batch / n
    grads = [None] * len(ws)
    delta = r[:, None]  # d loss / d output, per sample (times n)
    for i in range(len(ws) - 1, -1, -1):
        grads[i] = delta.T @ acts[i] / n
        if i > 0:
            delta = (delta @ ws[i]) * dphi(pre[i - 1])
    return loss, tuple(grads)


def mc_grad(problem: LossProblem, weights, batch: np.ndarray):
    return mc_loss_and_grad(problem, weights, batch)[1]


# --------------------------------------------------------------------------- closed form


def _angles(U: np.ndarray, V: np.ndarray, nu: np.ndarray, nv: np.ndarray) -> np.ndarray:
    """Pairwise angles via 2*atan2(|u^ - v^|, |u^ + v^|), accurate near 0 and pi."""
    Uh = U / np.where(nu > 0, nu, 1.0)[:, None]
    Vh = V / np.where(nv > 0, nv, 1.0)[:, None]
    diff = np.linalg.norm(Uh[:, None, :] - Vh[None, :, :], axis=2)
    summ = np.linalg.norm(Uh[:, None, :] + Vh[None, :, :], axis=2)
    return 2.0 * np.arctan2(diff, summ)


def arccos_kernel(U, V) -> np.ndarray:
    """``E[relu(u.x) relu(v.x)]`` for x ~ N(0, I), pairwise over rows of U and V:
    ``|u||v| (sin t + (pi - t) cos t) / (2 pi)``."""
    U, V = np.atleast_2d(np.asarray(U, float)), np.atleast_2d(np.asarray(V, float))
    nu, nv = np.linalg.norm(U, axis=1), np.linalg.norm(V, axis=1)
    t = _angles(U, V, nu, nv)
    return np.outer(nu, nv) * (np.sin(t) + (np.pi - t) * np.cos(t)) / (2 * np.pi)


def _kernel_grad_first(U, V) -> np.ndarray:
    """Row i: sum_j d k(u_i, v_j) / d u_i = (|v| sin t u^ + (pi - t) v) / (2 pi) summed over j."""
    nu, nv = np.linalg.norm(U, axis=1), np.linalg.norm(V, axis=1)
    t = _angles(U, V, nu, nv)
    live = nu >= 1e-12
    Uh = np.zeros_like(U)
    Uh[live] = U[live] / nu[live, None]
    G = (np.sin(t) @ nv)[:, None] * Uh + (np.pi - t) @ V
    G[~live] = 0.0
    return G / (2 * np.pi)


def analytic_loss_gaussian(W, V) -> float:
    """Exact two-layer ReLU loss under x ~ N(0, I_d)."""
    W, V = np.asarray(W, float), np.asarray(V, float)
    return 0.5 * float(arccos_kernel(W, W).sum() - 2 * arccos_kernel(W, V).sum() + arccos_kernel(V, V).sum())


def analytic_grad_gaussian(W, V) -> np.ndarray:
    W, V = np.asarray(W, float), np.asarray(V, float)
    return _kernel_grad_first(W, W) - _kernel_grad_first(W, V)


def _require_analytic(problem: LossProblem):
    if not (problem.student.second_layer_fixed and problem.student.activation.kind == "relu"
            and problem.distribution.is_standard_gaussian):
        raise ValueError("closed form needs a two-layer ReLU student with N(0, I) inputs")


def has_analytic(problem: LossProblem) -> bool:
    try:
        _require_analytic(problem)
    except ValueError:
        return False
    return True


def analytic_loss(problem: LossProblem, W) -> float:
    _require_analytic(problem)
    return analytic_loss_gaussian(W, problem.teacher)


def analytic_grad(problem: LossProblem, W) -> np.ndarray:
    _require_analytic(problem)
    return analytic_grad_gaussian(W, problem.teacher)


# --------------------------------------------------------------------------- invariance


@dataclass
class InvarianceReport:
    ok: bool
    checks: list = field(default_factory=list)


def _row_permutation_between(A: np.ndarray, B: np.ndarray, atol: float = 1e-12) -> Permutation | None:
    """rho with P_rho A = B if the rows of A are a permutation of those of B."""
    n = A.shape[0]
    used, images = set(), [0] * n
    for j in range(n):
        for i in range(n):
            if i not in used and np.allclose(B[i], A[j], atol=atol):
                images[j] = i
                used.add(i)
                break
        else:
            return None
    return Permutation(tuple(images))


def verify_invariance(problem: LossProblem, W, transforms, n_samples: int = 4096, seed: int = 0) -> InvarianceReport:
    """Check that the loss is unchanged by the given symmetry transformations.

    Two-layer: each transform is ``(pi, U)`` acting as ``W -> P_pi W U``; the
    teacher must satisfy ``V = P_rho V U^T`` for some rho.  With a closed form
    available the two losses are compared exactly; otherwise a seeded batch X
    is compared against the transformed batch (rows ``U x``), which is only
    a sample of the same law when the distribution is U-invariant.

    Multilayer: each transform is ``(pi, rho)`` acting as
    ``(W2, W1) -> (W2 P_pi^T, P_pi W1 P_rho)``.
    """
    rng = np.random.default_rng(seed)
    report = InvarianceReport(True)
    dist = problem.distribution
    X = dist.sample(n_samples, rng)
    if problem.student.second_layer_fixed:
        W = np.asarray(W, float)
        V = np.asarray(problem.teacher, float)
        for pi, U in transforms:
            U = np.asarray(U, float)
            W2 = permutation_matrix(pi) @ W @ U
            rho = _row_permutation_between(V @ U.T, V)
            teacher_ok = rho is not None
            dist_ok = dist.is_invariant_under(U)
            entry = {"pi": pi.to_cycle_string(), "teacher_condition": teacher_ok, "distribution_invariant": dist_ok}
            if has_analytic(problem):
                diff = abs(analytic_loss_gaussian(W2, V) - analytic_loss_gaussian(W, V))
                entry.update(method="analytic", abs_diff=diff, ok=diff <= 1e-10)
            else:
                exact = abs(mc_loss(problem, W2, X) - mc_loss(problem, W, X @ U.T))
                paired = _paired_difference(problem, W2, W, X)
                entry.update(method="mc", exact_diff=exact, paired_diff=paired[0], paired_se=paired[1],
                             ok=teacher_ok and dist_ok and exact <= 1e-12 * max(1.0, mc_loss(problem, W, X)))
            report.checks.append(entry)
            report.ok &= bool(entry["ok"])
        return report
    ws = problem.student.check(W)
    tnet = problem.teacher_net
    tws = tnet.check(problem.teacher)
    for pi, rho in transforms:
        Ppi, Prho = permutation_matrix(pi), permutation_matrix(rho)
        new = list(ws)
        new[0] = Ppi @ ws[0] @ Prho
        new[1] = ws[1] @ Ppi.T
        Xr = X @ Prho.T  # rows P_rho x
        t0, _, _ = _forward_batch(tnet, tws, X)
        t1, _, _ = _forward_batch(tnet, tws, Xr)
        teacher_ok = bool(np.allclose(t0, t1, rtol=1e-12, atol=1e-12))
        dist_ok = dist.is_invariant_under(Prho)
        exact = abs(mc_loss(problem, tuple(new), X) - mc_loss(problem, tuple(ws), Xr))
        entry = {"pi": pi.to_cycle_string(), "rho": rho.to_cycle_string(), "teacher_condition": teacher_ok,
                 "distribution_invariant": dist_ok, "method": "mc", "exact_diff": exact,
                 "ok": teacher_ok and dist_ok and exact <= 1e-12 * max(1.0, mc_loss(problem, tuple(ws), X))}
        report.checks.append(entry)
        report.ok &= bool(entry["ok"])
    return report


def _paired_difference(problem, Wa, Wb, X) -> tuple[float, float]:
    ra, _, _ = _residual(problem, problem.student.check(Wa), X)
    rb, _, _ = _residual(problem, problem.student.check(Wb), X)
    diff = 0.5 * (ra * ra - rb * rb)
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(len(diff)))


def hidden_permutation(weights, i: int, pi: Permutation):
    """``(W_{i+1}, W_i) -> (W_{i+1} P_pi^T, P_pi W_i)`` on a multilayer weight tuple (0-based layer i)."""
    ws = [np.asarray(w, float) for w in weights]
    P = permutation_matrix(pi)
    ws[i] = P @ ws[i]
    ws[i + 1] = ws[i + 1] @ P.T
    return tuple(ws)


# --------------------------------------------------------------------------- teachers / configs


def teacher_identity(d: int) -> np.ndarray:
    return np.eye(d)


def teacher_block_scaled(scales: Sequence[float], d: int) -> np.ndarray:
    """``s_1 I_{d/m} + ... + s_m I_{d/m}`` as a block diagonal matrix."""
    m = len(scales)
    if d % m:
        raise ValueError(f"d = {d} is not divisible into {m} equal blocks")
    return np.diag(np.repeat(np.asarray(scales, float), d // m))


def _activation_from(obj) -> ActivationSpec:
    if isinstance(obj, str):
        return ActivationSpec(obj)
    return ActivationSpec(obj.get("kind", "relu"), obj.get("slope", 0.01), obj.get("beta", 1.0))


def problem_from_config(cfg: dict, base_dir=None) -> LossProblem:
    """Build a problem from the JSON config layout::

        {"student": {"dims": [d, k], "activation": "relu", "second_layer_fixed": true},
         "teacher": "identity" | {"block_scaled": [1, 2]} | {"matrix": "V.csv"} | {"layers": [...]},
         "distribution": {"kind": "gaussian", "cov": ...} | {"kind": "uniform_box", "lo": -1, "hi": 1}}
    """
    from pathlib import Path

    from .io import read_matrix_csv

    s = cfg["student"]
    dims = tuple(s["dims"])
    act = _activation_from(s.get("activation", "relu"))
    fixed = bool(s.get("second_layer_fixed", len(dims) == 2))
    student = NetworkSpec(dims, act, fixed)
    d = dims[0]
    t = cfg.get("teacher", "identity")
    if fixed:
        if t == "identity":
            teacher = teacher_identity(d)
        elif "block_scaled" in t:
            teacher = teacher_block_scaled(t["block_scaled"], d)
        elif "matrix" in t:
            path = Path(t["matrix"])
            teacher = read_matrix_csv(path if base_dir is None or path.is_absolute() else Path(base_dir) / path)
        else:
            raise ValueError(f"bad teacher spec {t!r}")
    else:
        if t == "identity":
            # (1^T, I, ..., I) in the student's depth
            n_layers = len(dims) - 1
            teacher = tuple([np.eye(d)] * (n_layers - 1) + [np.ones((1, d))])
        elif "layers" in t:
            teacher = tuple(np.asarray(v, float) for v in t["layers"])
        else:
            raise ValueError(f"bad multilayer teacher spec {t!r}")
    dc = cfg.get("distribution", {"kind": "gaussian"})
    if dc["kind"] == "gaussian":
        cov = dc.get("cov")
        if isinstance(cov, dict) and "block_scaled" in cov:
            cov = np.diag(teacher_block_scaled(cov["block_scaled"], d))
        dist = DistributionSpec.gaussian(d, cov)
    elif dc["kind"] == "uniform_box":
        dist = DistributionSpec.uniform_box(dc.get("lo", -1.0), dc.get("hi", 1.0), d)
    else:
        raise ValueError(f"unknown distribution {dc['kind']!r}")
    return LossProblem(student, teacher, dist)
