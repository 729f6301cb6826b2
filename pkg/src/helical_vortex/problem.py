"""Problem data: disc radius, coefficient matrix field K and weight q."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional
import math

import numpy as np

from .geometry import (HelixSpec, alpha_beta_from, cholesky_T, helical_T,
                       kh_entries, polygonal_centers)


@dataclass(frozen=True)
class Problem:
    """-delta^2 div(K grad w) = (w - q)_+^p on the disc of radius R_star.

    ``entries(x1, x2)`` returns (K11, K12, K22) arrays; ``q(x)`` acts on
    (..., 2) arrays.  ``seeds`` are the extrema of q^2 sqrt(det K) that the
    vortex cores sit near, ``kind`` says whether they are minima or maxima.
    """

    R_star: float
    entries: Callable
    q: Callable
    seeds: np.ndarray
    kind: str = "min"
    spec: Optional[HelixSpec] = None
    alpha: float = 0.0
    beta: float = 0.0

    def K(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a, b, c = self.entries(x[..., 0], x[..., 1])
        return np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)

    def factor(self, x):
        x = np.asarray(x, dtype=float)
        if self.spec is not None:
            return helical_T(x, self.spec.k)
        return cholesky_T(self.K(x))

    def sqrt_det_K(self, x):
        a, b, c = self.entries(np.asarray(x)[..., 0], np.asarray(x)[..., 1])
        return np.sqrt(a * c - b * b)

    def landscape(self, x):
        """q^2 sqrt(det K)."""
        return self.q(x) ** 2 * self.sqrt_det_K(x)

    def kappa_limit(self, x) -> float:
        """Limiting circulation 2 pi q sqrt(det K) at a core location."""
        return float(2 * math.pi * self.q(np.asarray(x)) * self.sqrt_det_K(np.asarray(x)))

    @property
    def rho_bar(self) -> float:
        """Admissible-ball radius: a quarter of the smallest seed separation / boundary distance."""
        s = np.atleast_2d(self.seeds)
        d = [self.R_star - np.linalg.norm(z) for z in s]
        for i in range(len(s)):
            for j in range(i + 1, len(s)):
                d.append(np.linalg.norm(s[i] - s[j]))
        return 0.25 * float(min(d))


def helical_problem(spec: HelixSpec, alpha: float | None = None, beta: float | None = None) -> Problem:
    if alpha is None or beta is None:
        alpha, beta = alpha_beta_from(spec.c, spec.r_star, spec.k)
    k = spec.k

    def q(x):
        x = np.asarray(x, dtype=float)
        return alpha * np.sum(x * x, axis=-1) / 2 + beta

    return Problem(R_star=spec.R_star, entries=lambda x1, x2: kh_entries(x1, x2, k), q=q,
                   seeds=polygonal_centers(spec), kind="min", spec=spec, alpha=alpha, beta=beta)


def constant_problem(K, q, seeds, R_star: float = 1.0, kind: str = "min") -> Problem:
    """Constant coefficient matrix K with an arbitrary weight q (callable or constant)."""
    K = np.asarray(K, dtype=float)
    cholesky_T(K)  # validates SPD

    def entries(x1, x2):
        one = np.ones_like(np.asarray(x1, dtype=float))
        return K[0, 0] * one, K[0, 1] * one, K[1, 1] * one

    qf = q if callable(q) else (lambda x, c=float(q): np.full(np.asarray(x).shape[:-1], c))
    return Problem(R_star=R_star, entries=entries, q=qf, seeds=np.atleast_2d(np.asarray(seeds, dtype=float)),
                   kind=kind)
