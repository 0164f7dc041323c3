"""CMA-ES coefficient training for program graphs.

The optimizer is deliberately black-box: it only ever sees the scalar
objective (max error over the training set) and never differentiates the
program.  Update equations are the standard rank-1 + rank-mu covariance
adaptation with cumulative step-size control and the usual default
learning rates; coefficient dimensionality here is tiny (k <= ~20), so a
full eigendecomposition per generation is cheap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .evaluation import Dataset, batch_errors
from .graphs import ArithmeticMode, ProgramGraph


@dataclass(frozen=True)
class CmaesConfig:
    population: int = 128
    max_generations: int = 10_000
    sigma0: float = 0.3
    # early stopping never fires before this many generations; afterwards it
    # fires once the latest half of all generations brought no improvement
    early_stop_min_generations: int = 100
    seed: int = 0
    trace_path: str | None = None

    def __post_init__(self):
        if self.population < 4:
            raise ValueError(f"population must be >= 4, got {self.population}")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")


def init_coefficients(k: int, rng: np.random.Generator) -> np.ndarray:
    """Initial values: sign ± with probability 1/2, magnitude 10^-alpha,
    alpha uniform on [0, 8].  Spans the decades coefficients tend to live in
    without favoring any one scale.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    alpha = rng.uniform(0.0, 8.0, size=k)
    sign = np.where(rng.random(k) < 0.5, -1.0, 1.0)
    return sign * 10.0 ** -alpha


def train_coefficients(graph: ProgramGraph, trainset: Dataset, config: CmaesConfig,
                       rng: np.random.Generator | None = None) -> tuple[tuple[float, ...], float]:
    """Minimize max error over trainset; returns (coefficients, best error).

    k=0 programs skip optimization and report their direct error.  If no
    candidate ever scores finite, the initial vector is returned with +inf.
    For float32 datasets candidates are perturbed in binary64 and rounded
    to float32 only when bound into the program, and the returned vector is
    float32-exact.
    """
    k = len(graph.free_coefficients)
    if k == 0:
        return (), float(batch_errors(graph, np.zeros((1, 0)), trainset)[0])
    if rng is None:
        rng = np.random.default_rng(config.seed)

    n = k
    lam = config.population
    mean = init_coefficients(n, rng)
    init = mean.copy()
    sigma = config.sigma0

    # standard weight/learning-rate schedule
    mu = lam // 2
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mu_eff = 1.0 / np.sum(w**2)
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, np.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = np.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

    p_sigma = np.zeros(n)
    p_c = np.zeros(n)
    cov = np.eye(n)
    eigvals = np.ones(n)
    eigvecs = np.eye(n)

    best_err = np.inf
    best_x = init
    last_improvement = 0
    trace_rows: list[tuple[int, float]] = []

    for gen in range(1, config.max_generations + 1):
        z = rng.standard_normal((lam, n))
        y = z @ (eigvecs * np.sqrt(eigvals)).T  # y_i = B D z_i
        xs = mean + sigma * y
        errs = batch_errors(graph, xs, trainset)
        order = np.argsort(errs, kind="stable")
        gen_best = float(errs[order[0]])
        if gen_best < best_err:  # strict, tolerance 0
            best_err = gen_best
            best_x = xs[order[0]].copy()
            last_improvement = gen
        if config.trace_path is not None:
            trace_rows.append((gen, best_err))

        sel = order[:mu]
        y_w = w @ y[sel]
        mean = mean + sigma * (w @ xs[sel] - mean)  # c_m = 1

        inv_sqrt_y = eigvecs @ ((eigvecs.T @ y_w) / np.sqrt(eigvals))
        p_sigma = (1.0 - c_sigma) * p_sigma + np.sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * inv_sqrt_y
        norm_ps = float(np.linalg.norm(p_sigma))
        h_sigma = norm_ps / np.sqrt(1.0 - (1.0 - c_sigma) ** (2.0 * gen)) < (1.4 + 2.0 / (n + 1.0)) * chi_n
        p_c = (1.0 - c_c) * p_c + (np.sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w if h_sigma else 0.0)

        rank_mu = (y[sel].T * w) @ y[sel]
        delta_h = (1.0 - float(h_sigma)) * c_c * (2.0 - c_c)
        cov = ((1.0 - c_1 - c_mu) * cov
               + c_1 * (np.outer(p_c, p_c) + delta_h * cov)
               + c_mu * rank_mu)
        # exponent clamp keeps sigma finite on all-infeasible plateaus where
        # CSA sees runaway "progress"; bounds are far outside useful scales
        sigma = sigma * float(np.exp(min((c_sigma / d_sigma) * (norm_ps / chi_n - 1.0), 10.0)))
        sigma = min(max(sigma, 1e-300), 1e12)

        if not np.all(np.isfinite(cov)):
            # divergence guard: restart the sampling distribution in place
            cov = np.eye(n)
            p_sigma = np.zeros(n)
            p_c = np.zeros(n)
            sigma = config.sigma0
        cov = (cov + cov.T) / 2.0
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, max(float(eigvals.max()) * 1e-28, 1e-300) if eigvals.size else 1e-300)

        if gen >= config.early_stop_min_generations and (gen - last_improvement) * 2 >= gen:
            break

    if config.trace_path is not None:
        with open(config.trace_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["generation", "best_error"])
            wr.writerows(trace_rows)

    if not np.isfinite(best_err):
        best_x = init
        best_err = np.inf
    if trainset.mode is ArithmeticMode.FLOAT32:
        best_x = np.asarray(best_x, dtype=np.float32).astype(np.float64)
    return tuple(float(c) for c in best_x), float(best_err)
