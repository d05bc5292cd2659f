"""SGD ensembles on teacher-student problems, with optional full-gradient refinement.

Each run draws its own ``SeedSequence`` child from the master seed; the child
spawns one stream for initialization and one for the fresh sample batches, so
runs are independent and reproducible regardless of execution order.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .isotropy import IsotropyReport, classify
from .relu_loss import (
    LossProblem,
    analytic_grad,
    analytic_loss,
    has_analytic,
    mc_loss_and_grad,
    sample_batch,
)

__all__ = [
    "TrainConfig",
    "RunResult",
    "RefineResult",
    "EnsembleResult",
    "xavier_init",
    "init_weights",
    "sgd_run",
    "refine",
    "refine_symmetrized",
    "run_ensemble",
    "GLOBAL_LOSS_THRESHOLD",
    "teacher_orbit_distance",
]

# runs above this final loss count as non-global
GLOBAL_LOSS_THRESHOLD = 0.01


@dataclass(frozen=True)
class TrainConfig:
    step_size: float = 0.01
    batch_size: int = 1000
    max_steps: int = 20000
    plateau_window: int = 200
    min_rel_improvement: float = 1e-3
    runs: int = 20
    master_seed: int = 0
    refine: bool = False
    refine_max_iter: int = 20000
    refine_tol: float = 1e-9
    snapshot_every: int = 500
    classify_tol: float = 1e-6
    workers: int = 1

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.plateau_window < 2:
            raise ValueError("plateau window must be >= 2")
        if self.batch_size < 1 or self.max_steps < 0 or self.runs < 1:
            raise ValueError("batch_size, runs must be >= 1 and max_steps >= 0")

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class RunResult:
    run_id: int
    weights: object
    mc_grad_norm: float
    analytic_grad_norm: float | None
    loss: float
    steps: int
    stop_reason: str  # plateau | max_steps | diverged
    snapshots: list = field(default_factory=list)  # (step, weights)
    refined: bool = False
    refine_converged: bool | None = None
    report: IsotropyReport | None = None

    @property
    def diverged(self) -> bool:
        return self.stop_reason == "diverged"

    @property
    def non_global(self) -> bool:
        return not self.diverged and self.loss > GLOBAL_LOSS_THRESHOLD

    @property
    def first_layer(self) -> np.ndarray:
        return self.weights if isinstance(self.weights, np.ndarray) else self.weights[0]

    def summary(self) -> dict:
        out = {
            "run_id": self.run_id,
            "loss": self.loss,
            "mc_grad_norm": self.mc_grad_norm,
            "analytic_grad_norm": self.analytic_grad_norm,
            "steps": self.steps,
            "stop_reason": self.stop_reason,
            "refined": self.refined,
            "refine_converged": self.refine_converged,
            "non_global": self.non_global,
        }
        if self.report is not None:
            out["isotropy_order"] = self.report.isotropy_order
            out["structure"] = self.report.structure_name
            out["catalog_match"] = self.report.match_name
        return out


def xavier_init(shape: tuple[int, int], seed) -> np.ndarray:
    """Uniform on [-a, a], a = sqrt(6 / (rows + cols))."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    k, d = shape
    a = math.sqrt(6.0 / (k + d))
    return rng.uniform(-a, a, size=(k, d))


def init_weights(problem: LossProblem, rng: np.random.Generator):
    shapes = problem.student.weight_shapes()
    if problem.student.second_layer_fixed:
        return xavier_init(shapes[0], rng)
    return tuple(xavier_init(s, rng) for s in shapes)


def _norm(g) -> float:
    if isinstance(g, np.ndarray):
        return float(np.linalg.norm(g))
    return float(math.sqrt(sum(float(np.sum(x * x)) for x in g)))


def _step(w, g, h):
    if isinstance(w, np.ndarray):
        return w - h * g
    return tuple(a - h * b for a, b in zip(w, g))


def _copy(w):
    return w.copy() if isinstance(w, np.ndarray) else tuple(x.copy() for x in w)


def _finite(w) -> bool:
    if isinstance(w, np.ndarray):
        return bool(np.isfinite(w).all())
    return all(np.isfinite(x).all() for x in w)


def sgd_run(problem: LossProblem, config: TrainConfig, run_seed, run_id: int = 0, W0=None) -> RunResult:
    """Plain SGD with a fresh batch per step until the gradient-norm plateau or max_steps."""
    ss = run_seed if isinstance(run_seed, np.random.SeedSequence) else np.random.SeedSequence(run_seed)
    init_ss, data_ss = ss.spawn(2)
    W = init_weights(problem, np.random.default_rng(init_ss)) if W0 is None else _copy(W0)
    data_rng = np.random.default_rng(data_ss)
    h, n, win = config.step_size, config.batch_size, config.plateau_window
    norms: list[float] = []
    snapshots = [(0, _copy(W))]
    prev_median = None
    loss, gnorm, reason, t = math.nan, math.nan, "max_steps", 0
    for t in range(1, config.max_steps + 1):
        X = sample_batch(problem.distribution, n, data_rng)
        loss, g = mc_loss_and_grad(problem, W, X)
        gnorm = _norm(g)
        if not (math.isfinite(loss) and math.isfinite(gnorm)):
            reason = "diverged"
            break
        if gnorm == 0.0:
            reason = "plateau"
            break
        W = _step(W, g, h)
        if not _finite(W):
            reason = "diverged"
            break
        norms.append(gnorm)
        if t % config.snapshot_every == 0:
            snapshots.append((t, _copy(W)))
        if t % win == 0:
            med = float(np.median(norms[-win:]))
            if prev_median is not None and (prev_median - med) < config.min_rel_improvement * prev_median:
                reason = "plateau"
                break
            prev_median = med
    else:
        t = config.max_steps
    if snapshots[-1][0] != t and reason != "diverged":
        snapshots.append((t, _copy(W)))
    result = RunResult(run_id, W, gnorm, None, loss, t, reason, snapshots)
    if reason != "diverged" and has_analytic(problem):
        result.loss = analytic_loss(problem, W)
        result.analytic_grad_norm = _norm(analytic_grad(problem, W))
    return result


@dataclass
class RefineResult:
    weights: np.ndarray
    grad_norm: float
    loss: float
    iterations: int
    converged: bool
    losses: list = field(default_factory=list)


def _descent(loss_fn, grad_fn, W, tol: float, max_iter: int) -> RefineResult:
    """Gradient descent with Armijo backtracking; trial steps from the Barzilai-Borwein rule.

    Loss is monotone non-increasing.  Once the predicted decrease is below the
    rounding level of the loss, a step is taken if it shrinks the gradient and
    moves the loss by no more than that rounding level; the recorded loss is
    then held at its previous value.
    """
    W = _copy(W)
    f, g = loss_fn(W), grad_fn(W)
    gn = _norm(g)
    noise = 1e-14 * max(abs(f), 1.0)
    losses = [f]
    t = 1.0
    prev = None
    it = 0
    while gn >= tol and it < max_iter:
        it += 1
        if prev is not None:
            s = W - prev[0]
            y = g - prev[1]
            sy = float(np.sum(s * y))
            if sy > 0:
                t = min(max(float(np.sum(s * s)) / sy, 1e-8), 1e4)
        accepted = False
        gnew = None
        for _ in range(60):
            Wn = W - t * g
            fn = loss_fn(Wn)
            dec = 1e-4 * t * gn * gn
            if fn <= f - dec:
                accepted = True
                break
            if dec < noise and fn <= f + noise:
                # loss differences are below rounding: require a smaller gradient instead
                gnew = grad_fn(Wn)
                if _norm(gnew) < gn:
                    accepted = True
                    break
                gnew = None
            t *= 0.5
        if not accepted:
            break
        prev = (W, g)
        W, f = Wn, min(fn, f)
        g = grad_fn(W) if gnew is None else gnew
        gn = _norm(g)
        losses.append(f)
    return RefineResult(W, gn, f, it, gn < tol, losses)


def refine(problem: LossProblem, W, tol: float = 1e-9, max_iter: int = 20000) -> RefineResult:
    """Full analytic-gradient descent to an (approximate) critical point."""
    if not has_analytic(problem):
        raise ValueError("refine needs the closed-form ReLU/Gaussian loss")
    W = np.asarray(W, float)
    return _descent(lambda w: analytic_loss(problem, w), lambda w: analytic_grad(problem, w), W, tol, max_iter)


def symmetrized_sample(problem: LossProblem, n_base: int, seed) -> np.ndarray:
    """Base sample closed under all coordinate permutations that preserve the distribution."""
    d = problem.distribution.dim
    X0 = sample_batch(problem.distribution, n_base, seed)
    perms = [p for p in itertools.permutations(range(d))
             if problem.distribution.is_invariant_under(np.eye(d)[list(p)])]
    return np.concatenate([X0[:, list(p)] for p in perms])


def refine_symmetrized(problem: LossProblem, W, n_base: int = 30, seed: int = 0, tol: float = 1e-9,
                       max_iter: int = 5000) -> RefineResult:
    """Full-batch descent on a permutation-closed fixed sample.

    Used when no closed form exists.  The empirical loss keeps the exact
    invariance of the population loss under the distribution's coordinate
    permutations (and the matching teacher symmetries), so the refined point
    can show exact equalities.
    """
    X = symmetrized_sample(problem, n_base, seed)
    W = np.asarray(W, float)
    phi = problem.student.activation
    target = phi(X @ np.asarray(problem.teacher, float).T).sum(axis=1)
    cache: dict = {}

    def evaluate(w):
        key = w.tobytes()
        if key not in cache:
            Z = X @ w.T
            r = phi(Z).sum(axis=1) - target
            cache.clear()
            cache[key] = (0.5 * float(np.mean(r * r)), (r[:, None] * phi.derivative(Z)).T @ X / len(X))
        return cache[key]

    return _descent(lambda w: evaluate(w)[0], lambda w: evaluate(w)[1], W, tol, max_iter)


def _single_run(args) -> RunResult:
    problem, config, ss, run_id = args
    res = sgd_run(problem, config, ss, run_id)
    if config.refine and not res.diverged and problem.student.second_layer_fixed:
        if has_analytic(problem):
            ref = refine(problem, res.weights, config.refine_tol, config.refine_max_iter)
            res.analytic_grad_norm = ref.grad_norm
        else:
            ref = refine_symmetrized(problem, res.weights, seed=ss.spawn(1)[0])
        res.weights, res.loss = ref.weights, ref.loss
        res.refined, res.refine_converged = True, ref.converged
    if not res.diverged:
        res.report = classify(res.first_layer, config.classify_tol)
    return res


@dataclass
class EnsembleResult:
    runs: list[RunResult]
    config: TrainConfig

    @property
    def histogram(self) -> dict[str, int]:
        c = Counter(r.report.match_name for r in self.runs if not r.diverged and r.report is not None)
        return dict(sorted(c.items()))

    @property
    def non_global_histogram(self) -> dict[str, int]:
        c = Counter(r.report.match_name for r in self.runs if r.non_global and r.report is not None)
        return dict(sorted(c.items()))

    def non_global_orders(self) -> list[int]:
        return [r.report.isotropy_order for r in self.runs
                if r.non_global and r.report is not None and r.report.isotropy_order is not None]

    def off_teacher_orders(self, teacher, tol: float = 1e-3) -> list[int]:
        """Isotropy orders of endpoints outside the row-permutation orbit of ``teacher``.

        Unlike :meth:`non_global_orders` this does not rely on a loss threshold, so it
        also counts zero-loss endpoints when the global minimum set is larger than the orbit.
        """
        return [r.report.isotropy_order for r in self.runs
                if not r.diverged and r.report is not None and r.report.isotropy_order is not None
                and teacher_orbit_distance(r.first_layer, teacher) > tol]

    def summary(self) -> dict:
        orders = self.non_global_orders()
        return {
            "runs": len(self.runs),
            "diverged": sum(r.diverged for r in self.runs),
            "non_global": sum(r.non_global for r in self.runs),
            "histogram": self.histogram,
            "non_global_histogram": self.non_global_histogram,
            "median_non_global_isotropy_order": float(np.median(orders)) if orders else None,
            "per_run": [r.summary() for r in self.runs],
        }


def teacher_orbit_distance(W, V) -> float:
    """min over row permutations P of max |W - P V|; inf on shape mismatch.

    Exact for up to 8 rows, a greedy upper bound beyond that.
    """
    W, V = np.asarray(W, float), np.asarray(V, float)
    if W.shape != V.shape:
        return math.inf
    cost = np.abs(W[:, None, :] - V[None, :, :]).max(axis=2)
    k = len(W)
    if k <= 8:
        rows = np.arange(k)
        return float(min(cost[rows, list(p)].max() for p in itertools.permutations(range(k))))
    free, worst = set(range(k)), 0.0
    for i in range(k):
        j = min(free, key=lambda j: cost[i, j])
        free.discard(j)
        worst = max(worst, cost[i, j])
    return float(worst)


def run_ensemble(problem: LossProblem, config: TrainConfig) -> EnsembleResult:
    seeds = np.random.SeedSequence(config.master_seed).spawn(config.runs)
    jobs = [(problem, config, ss, i) for i, ss in enumerate(seeds)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            runs = list(ex.map(_single_run, jobs))
    else:
        runs = [_single_run(j) for j in jobs]
    runs.sort(key=lambda r: r.run_id)
    return EnsembleResult(runs, config)


def with_overrides(config: TrainConfig, **kw) -> TrainConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
