"""Exactly solvable hyperoctahedral-invariant quartic.

    f(x) = (a/2)|x|^2 + (b/4)|x|^4 + (c/4) sum_i x_i^4

Critical points: choose a support S (p = |S| nonzero coordinates) and signs;
the nonzero coordinates are all +-r with r^2 = -a / (b p + c).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .perm_core import SignedPermutation, hyperoctahedral_group

__all__ = [
    "EtaParams",
    "EtaCriticalPoint",
    "EnumerationResult",
    "eta_value",
    "eta_grad",
    "eta_hessian",
    "enumerate_critical_points",
    "hessian_spectrum_formula",
    "classify_extremality",
    "isotropy_of_point",
    "brute_force_isotropy_order",
    "isotropy_order",
]


@dataclass(frozen=True)
class EtaParams:
    a: float
    b: float
    c: float
    n: int

    @classmethod
    def eta(cls, n: int) -> EtaParams:
        """``|x|^4 + sum x_i^4 - |x|^2`` in this normalization."""
        return cls(-2.0, 4.0, 4.0, n)

    def radius_sq(self, p: int) -> float | None:
        den = self.b * p + self.c
        if den == 0:
            return None
        r2 = -self.a / den
        return r2 if r2 > 0 else None


def eta_value(params: EtaParams, x) -> float:
    x = np.asarray(x, float)
    s = float(x @ x)
    return 0.5 * params.a * s + 0.25 * params.b * s * s + 0.25 * params.c * float(np.sum(x ** 4))


def eta_grad(params: EtaParams, x) -> np.ndarray:
    x = np.asarray(x, float)
    return params.a * x + params.b * float(x @ x) * x + params.c * x ** 3


def eta_hessian(params: EtaParams, x) -> np.ndarray:
    x = np.asarray(x, float)
    n = len(x)
    H = (params.a + params.b * float(x @ x)) * np.eye(n) + 2 * params.b * np.outer(x, x)
    H += 3 * params.c * np.diag(x ** 2)
    return 0.5 * (H + H.T)


def hessian_spectrum_formula(params: EtaParams, p: int) -> np.ndarray:
    """Sorted eigenvalues at a critical point with p nonzero coordinates."""
    n, a, b, c = params.n, params.a, params.b, params.c
    if not 0 <= p <= n:
        raise ValueError("support size out of range")
    if p == 0:
        return np.full(n, float(a))
    r2 = params.radius_sq(p)
    if r2 is None:
        raise ValueError(f"no critical point with support size {p}")
    vals = [r2 * 2 * (b * p + c)] + [r2 * 2 * c] * (p - 1) + [-r2 * c] * (n - p)
    return np.sort(np.array(vals))


def classify_extremality(spectrum, eps: float = 1e-12) -> str:
    s = np.asarray(spectrum, float)
    if (np.abs(s) < eps).any():
        return "degenerate"
    if (s > 0).all():
        return "min"
    if (s < 0).all():
        return "max"
    return "saddle"


def isotropy_order(n: int, p: int) -> int:
    """|S_p x H_{n-p}| = p! 2^(n-p) (n-p)!."""
    return math.factorial(p) * 2 ** (n - p) * math.factorial(n - p)


@dataclass
class EtaCriticalPoint:
    x: np.ndarray
    support: tuple[int, ...]
    signs: tuple[int, ...]
    r: float
    grad_norm: float
    spectrum: np.ndarray
    extremality: str
    value: float

    @property
    def p(self) -> int:
        return len(self.support)

    @property
    def isotropy(self) -> dict:
        return isotropy_of_point(self)


def isotropy_of_point(point) -> dict:
    """Descriptor ``S_p x H_{n-p}`` of the stabilizer in H_n (up to conjugacy)."""
    x = point.x if isinstance(point, EtaCriticalPoint) else np.asarray(point, float)
    n = len(x)
    # nonzero coordinates of a critical point share one modulus
    p = int(np.count_nonzero(np.abs(x) > 1e-12))
    if p == 0:
        name = f"H_{n}"
    elif p == n:
        name = f"S_{n}"
    else:
        name = f"S_{p} x H_{n - p}"
    return {"p": p, "name": name, "order": isotropy_order(n, p)}


def brute_force_isotropy_order(x, atol: float = 1e-12) -> int:
    """Count signed permutations g with g x = x (n <= 6)."""
    x = np.asarray(x, float)
    if len(x) > 6:
        raise ValueError("brute force limited to n <= 6")
    return sum(np.allclose(g.apply(x), x, atol=atol) for g in hyperoctahedral_group(len(x)))


@dataclass
class EnumerationResult:
    points: list[EtaCriticalPoint]
    skipped_supports: dict[int, int] = field(default_factory=dict)  # p -> number of supports skipped

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def counts_by_p(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for pt in self.points:
            out[pt.p] = out.get(pt.p, 0) + 1
        return dict(sorted(out.items()))

    def census(self) -> dict[str, int]:
        out = {"min": 0, "max": 0, "saddle": 0, "degenerate": 0}
        for pt in self.points:
            out[pt.extremality] += 1
        return out


def enumerate_critical_points(params: EtaParams, grad_tol: float = 1e-10) -> EnumerationResult:
    """All sign/support critical points; supports without a real radius are reported as skipped."""
    n = params.n
    points, skipped = [], {}
    for p in range(n + 1):
        r2 = 0.0 if p == 0 else params.radius_sq(p)
        if r2 is None:
            skipped[p] = math.comb(n, p)
            continue
        r = math.sqrt(r2)
        spec = hessian_spectrum_formula(params, p)
        kind = classify_extremality(spec)
        for S in itertools.combinations(range(n), p):
            for signs in itertools.product((1, -1), repeat=p):
                x = np.zeros(n)
                x[list(S)] = r * np.array(signs, float)
                gn = float(np.linalg.norm(eta_grad(params, x)))
                if gn >= grad_tol:
                    raise ArithmeticError(f"point with support {S} has gradient norm {gn:.3g}")
                points.append(EtaCriticalPoint(x, S, tuple(signs), r, gn, spec, kind, eta_value(params, x)))
    return EnumerationResult(points, skipped)


def random_signed_permutation(n: int, rng: np.random.Generator) -> SignedPermutation:
    from .perm_core import Permutation

    return SignedPermutation(Permutation(tuple(int(v) for v in rng.permutation(n))),
                             tuple(int(s) for s in rng.choice([-1, 1], size=n)))
