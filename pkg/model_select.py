"""
Model selection: BIC, warm-started regularization paths and stability selection
"""
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed

import config
from blockmat import BlockSymMatrix, block_norms, c_operator, max_offdiag_block_norm
from data_cov import covariance
from errors import InputError, NumericalError
from screening import estimate_screened, screen
from solver import SolverConfig, estimate, graph_from_precision, log_det

logger = logging.getLogger(__name__)


# ============================================
# BIC AND GRID
# ============================================

def bic(s, fit, n, scaled=True):
    """
    n (tr(S Omega) - log|Omega|) + sum_{a<b} 1{Omega_ab != 0} k_a k_b log(n)

    With scaled=False the likelihood term is not multiplied by n.
    """
    omega = getattr(fit, "omega_hat", fit)
    if n < 2:
        raise InputError("BIC needs at least two samples")
    s = getattr(s, "s", s)
    logdet = log_det(omega.data)
    if logdet is None:
        raise NumericalError("fitted precision is not positive definite")
    counts = omega.layout.attr_counts
    complexity = sum(counts[a] * counts[b] for a, b in graph_from_precision(omega).edges())
    likelihood = float(np.sum(s.data * omega.data)) - logdet
    return (n if scaled else 1.0) * likelihood + complexity * math.log(n)


def refit_on_support(cov, fit):
    """
    Unpenalized maximum-likelihood precision with the edge set of fit

    Node by node, the covariance W is updated so that it matches S on the
    node's own block and on every block shared with a neighbour; the inverse
    then vanishes off the support. Falls back to the penalized estimate when
    the constrained fit does not exist (e.g. S singular on a neighbourhood).
    """
    omega_hat = getattr(fit, "omega_hat", fit)
    layout = omega_hat.layout
    s = getattr(cov, "s", cov).data
    graph = graph_from_precision(omega_hat)
    w = s.copy()
    try:
        for iteration in range(config.REFIT_MAX_ITER):
            change = 0.0
            for a in range(layout.node_count):
                idx_a = layout.indices([a])
                rest = layout.complement(a)
                nb = layout.indices(sorted(graph.neighbors(a)))
                if len(nb):
                    beta = scipy.linalg.solve(w[np.ix_(nb, nb)], s[np.ix_(nb, idx_a)],
                                              assume_a="pos")
                    column = w[np.ix_(rest, nb)] @ beta
                else:
                    column = np.zeros((len(rest), len(idx_a)))
                change = max(change, float(np.max(np.abs(column - w[np.ix_(rest, idx_a)]),
                                                  initial=0.0)))
                w[np.ix_(rest, idx_a)] = column
                w[np.ix_(idx_a, rest)] = column.T
            if change < config.REFIT_TOL:
                break
        factor = scipy.linalg.cho_factor(w, lower=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.warning("support refit failed (%s); scoring the penalized fit", e)
        return omega_hat
    omega = scipy.linalg.cho_solve(factor, np.eye(layout.total_dim))
    counts = layout.attr_counts
    support = block_norms(omega_hat.data, layout) > 0
    mask = np.repeat(np.repeat(support, counts, axis=0), counts, axis=1)
    omega = np.where(mask, (omega + omega.T) / 2.0, 0.0)
    if log_det(omega) is None:
        logger.warning("support refit is not positive definite; scoring the penalized fit")
        return omega_hat
    logger.debug("support refit: %d iterations, last change %.3g", iteration + 1, change)
    return BlockSymMatrix(layout, omega)


def lambda_grid(cov, count=config.GRID_SIZE, ratio=config.GRID_RATIO):
    """Log-spaced, descending from the smallest lambda giving an empty graph"""
    if count < 2:
        raise InputError("grid needs at least two points")
    s = getattr(cov, "s", cov)
    # nudged up so rounding in the block norms cannot leave an edge in the first fit
    lam_max = max_offdiag_block_norm(s) * (1.0 + 1e-12)
    if lam_max == 0.0:
        # already block diagonal: every lambda gives the empty graph
        lam = float(np.max(np.diag(c_operator(s))))
        warnings.warn("S has no off-diagonal signal; using a single-point grid")
        return np.array([lam])
    return np.geomspace(lam_max, lam_max / ratio, count)


# ============================================
# PATH
# ============================================

@dataclass
class PathResult:
    lambdas: np.ndarray
    reports: list
    bic: list
    best_index: int
    refits: list = None

    @property
    def best(self):
        return self.reports[self.best_index]

    @property
    def best_lambda(self):
        return float(self.lambdas[self.best_index])

    def sweeps(self):
        return [r.sweeps for r in self.reports]

    def to_rows(self):
        return [{"lambda": float(lam), "bic": b, "edges": r.graph.number_of_edges(),
                 "sweeps": r.sweeps, "converged": r.converged, "final_gap": r.final_gap}
                for lam, r, b in zip(self.lambdas, self.reports, self.bic)]


def fit_path(cov, grid, cfg=None, n=None, warm=True, refit=True):
    """
    Fit every lambda of a descending grid, each starting from the previous fit

    n defaults to the largest pairwise sample count recorded in cov. With
    refit, each point is scored on the unpenalized fit over its edge set
    (refit_on_support); otherwise on the penalized estimate itself.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) >= 0):
        raise InputError("lambda grid must be strictly decreasing")
    if n is None:
        n = int(np.max(cov.n_eff))
    base = cfg or SolverConfig(lam=float(grid[0]))

    reports, refits, scores = [], [], []
    previous = None
    for lam in grid:
        start = (previous.omega_hat, previous.sigma_hat) if (warm and previous) else None
        report = estimate(cov, base.with_lambda(lam), warm_start=start)
        reports.append(report)
        refits.append(refit_on_support(cov, report) if refit else report.omega_hat)
        scores.append(bic(cov, refits[-1], n))
        previous = report
        logger.debug("path lambda=%.4g edges=%d bic=%.4f", lam,
                     report.graph.number_of_edges(), scores[-1])

    # first minimum wins: ties go to the larger lambda (sparser graph)
    best = int(np.argmin(scores))
    return PathResult(grid, reports, scores, best, refits)


def select_by_bic(cov, grid_size=config.GRID_SIZE, cfg=None, n=None):
    return fit_path(cov, lambda_grid(cov, grid_size), cfg, n)


# ============================================
# STABILITY SELECTION
# ============================================

@dataclass
class StabilityResult:
    edge_counts: np.ndarray
    stable_edges: list
    reps: int
    subsample_fraction: float
    threshold: int
    lam: float
    seed: int
    failed: int = 0

    def to_dict(self):
        return {
            "lambda": self.lam,
            "reps": self.reps,
            "subsample_fraction": self.subsample_fraction,
            "threshold": self.threshold,
            "seed": self.seed,
            "failed": self.failed,
            "stable_edges": [list(e) for e in self.stable_edges],
            "edge_counts": self.edge_counts.tolist(),
        }


def _replicate(d, rows, lam, cfg, center):
    sub = d.rows(rows)
    try:
        cov = covariance(sub, center=center)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = estimate_screened(cov, cfg.with_lambda(lam))
    except NumericalError as e:
        logger.warning("stability replicate failed: %s", e)
        return None
    return sorted(report.graph.edges())


def stability_select(d, lam, reps=config.STABILITY_REPS,
                     fraction=config.STABILITY_FRACTION,
                     threshold=config.STABILITY_THRESHOLD,
                     seed=config.SEED, cfg=None, center=False, n_jobs=1):
    """
    Count how often each edge is selected across subsamples without replacement

    Replicate i draws its rows from its own child of SeedSequence(seed), so
    results do not depend on execution order or n_jobs.
    """
    m = int(math.floor(fraction * d.n))
    if m < 2:
        raise InputError(f"subsample size floor({fraction} * {d.n}) = {m} is below 2")
    if threshold > reps:
        raise InputError(f"threshold {threshold} exceeds reps {reps}")
    cfg = cfg or SolverConfig(lam=lam)

    children = np.random.SeedSequence(seed).spawn(reps)
    draws = [np.sort(np.random.default_rng(c).choice(d.n, size=m, replace=False))
             for c in children]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(d, rows, lam, cfg, center) for rows in draws
    )

    failed = sum(r is None for r in results)
    if failed > config.STABILITY_MAX_FAILED * reps:
        raise NumericalError(f"{failed} of {reps} stability replicates failed",
                             failed=failed, reps=reps)

    p = d.layout.node_count
    counts = np.zeros((p, p), dtype=int)
    for edges in results:
        for a, b in edges or []:
            counts[a, b] += 1
            counts[b, a] += 1
    stable = [(a, b) for a in range(p) for b in range(a + 1, p) if counts[a, b] >= threshold]
    logger.info("stability: %d stable edges from %d replicates (%d failed)",
                len(stable), reps, failed)
    return StabilityResult(counts, stable, reps, fraction, threshold, float(lam), seed, failed)


def path_partitions(cov, grid):
    """Screening partitions along a grid, for checking that they nest"""
    return [screen(cov, lam) for lam in grid]
