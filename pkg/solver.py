"""
Block coordinate descent for the Frobenius-block-penalized Gaussian likelihood

    minimize  tr(S Omega) - log|Omega| + lambda * sum_{a,b} ||Omega_ab||_F

One node at a time, row/column a of Omega takes a single proximal gradient
step; the covariance Sigma = Omega^-1 is kept current with the matrix
inversion lemma. The step size is halved whenever the step would leave the
PD cone or fail to decrease the objective. Stops on the duality gap.
"""
import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import networkx as nx
import numpy as np
import pandas as pd
import scipy.linalg

import config
from blockmat import AttributeLayout, BlockSymMatrix, block_norms
from errors import ConvergenceWarning, InputError, NumericalError

logger = logging.getLogger(__name__)


# ============================================
# CONFIG AND REPORT
# ============================================

@dataclass(frozen=True)
class SolverConfig:
    lam: float
    epsilon: float = config.EPSILON
    max_sweeps: int = config.MAX_SWEEPS
    initial_step: float = config.INITIAL_STEP
    min_step: float = config.MIN_STEP
    kkt_tol: float = config.KKT_TOL
    init: str = "diag"
    init_seed: Optional[int] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise InputError(f"lambda must be positive, got {self.lam}")
        if not self.epsilon > 0:
            raise InputError(f"epsilon must be positive, got {self.epsilon}")
        if not self.kkt_tol > 0:
            raise InputError(f"kkt_tol must be positive, got {self.kkt_tol}")
        if not 0 < self.min_step < self.initial_step:
            raise InputError("need 0 < min_step < initial_step",
                             min_step=self.min_step, initial_step=self.initial_step)
        if self.max_sweeps < 1:
            raise InputError("max_sweeps must be at least 1")
        if self.init not in ("diag", "random"):
            raise InputError(f"unknown init '{self.init}'")

    def with_lambda(self, lam):
        values = asdict(self)
        values["lam"] = float(lam)
        return SolverConfig(**values)

    def to_dict(self):
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out


@dataclass
class SolverReport:
    omega_hat: BlockSymMatrix
    sigma_hat: BlockSymMatrix
    objective_trace: list
    final_gap: Optional[float]
    sweeps: int
    step_halvings: int
    converged: bool
    lam: float
    gap_trace: list = field(default_factory=list)
    final_kkt: Optional[float] = None
    # "gap", "objective" (relative change fallback), "max_sweeps", or "mixed" after screening
    stop_reason: str = "max_sweeps"

    @property
    def graph(self):
        return graph_from_precision(self.omega_hat)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "final_gap": self.final_gap,
            "final_kkt": self.final_kkt,
            "sweeps": self.sweeps,
            "step_halvings": self.step_halvings,
            "objective": self.objective_trace[-1] if self.objective_trace else None,
            "objective_trace": list(self.objective_trace),
            "gap_trace": list(self.gap_trace),
            "edge_count": self.graph.number_of_edges(),
        }


# ============================================
# OBJECTIVE AND PROXIMAL STEP
# ============================================

def log_det(m):
    """log|m| via Cholesky, None when m is not PD"""
    try:
        chol = scipy.linalg.cholesky(m, lower=True)
    except np.linalg.LinAlgError:
        return None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def _objective(omega, s, lam, layout):
    logdet = log_det(omega)
    if logdet is None:
        return np.inf
    penalty = float(np.sum(block_norms(omega, layout)))
    return float(np.sum(s * omega)) - logdet + lam * penalty


def objective(omega, s, lam):
    """Penalized negative log-likelihood; +inf outside the PD cone"""
    return _objective(omega.data, s.data, lam, omega.layout)


def prox_block(m, t, lam):
    """Block soft-thresholding: (1 - t*lam/||m||_F)_+ * m"""
    m = np.asarray(m, dtype=float)
    norm = np.linalg.norm(m)
    if norm <= t * lam:
        return np.zeros_like(m)
    return (1.0 - t * lam / norm) * m


def _prox_strip(strip, t, lam, layout, k_a):
    """prox_block applied to every node block of a k_a x d row strip"""
    norms = block_norms(strip, AttributeLayout((k_a,)), layout)[0]
    with np.errstate(divide="ignore"):
        scale = np.where(norms > t * lam, 1.0 - t * lam / norms, 0.0)
    return strip * np.repeat(scale, layout.attr_counts)


# ============================================
# COVARIANCE UPDATE
# ============================================

def _complement_inverse(sigma, idx_a, rest):
    """(Omega_rest,rest)^-1 = Sigma_rr - Sigma_ra Sigma_aa^-1 Sigma_ar"""
    sigma_aa = sigma[np.ix_(idx_a, idx_a)]
    sigma_ra = sigma[np.ix_(rest, idx_a)]
    try:
        factor = scipy.linalg.cho_factor(sigma_aa, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("covariance diagonal block lost positive definiteness")
    w = sigma[np.ix_(rest, rest)] - sigma_ra @ scipy.linalg.cho_solve(factor, sigma_ra.T)
    logdet_sigma_aa = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return (w + w.T) / 2.0, logdet_sigma_aa


def _schur(omega_aa, omega_ar, w):
    schur = omega_aa - omega_ar @ w @ omega_ar.T
    return (schur + schur.T) / 2.0


def _assemble_sigma(omega_aa, omega_ar, w, idx_a, rest, dim):
    schur = _schur(omega_aa, omega_ar, w)
    try:
        factor = scipy.linalg.cho_factor(schur, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("Schur complement is not positive definite")
    sigma_aa = scipy.linalg.cho_solve(factor, np.eye(len(idx_a)))
    sigma_aa = (sigma_aa + sigma_aa.T) / 2.0
    u = w @ omega_ar.T
    out = np.empty((dim, dim))
    out[np.ix_(idx_a, idx_a)] = sigma_aa
    cross = -sigma_aa @ u.T
    out[np.ix_(idx_a, rest)] = cross
    out[np.ix_(rest, idx_a)] = cross.T
    rr = w + u @ sigma_aa @ u.T
    out[np.ix_(rest, rest)] = (rr + rr.T) / 2.0
    return out


def cov_update(omega_hat, sigma_tilde, a):
    """
    Sigma-hat after row/column a of Omega changed, without a full inversion

    omega_hat differs from the precision behind sigma_tilde only in row and
    column a. Costs O(d^2 k_a).
    """
    layout = omega_hat.layout
    idx_a = layout.indices([a])
    rest = layout.complement(a)
    w, _ = _complement_inverse(sigma_tilde.data, idx_a, rest)
    data = omega_hat.data
    sigma = _assemble_sigma(data[np.ix_(idx_a, idx_a)], data[np.ix_(idx_a, rest)],
                            w, idx_a, rest, layout.total_dim)
    return BlockSymMatrix(layout, sigma)


# ============================================
# NODE UPDATE
# ============================================

class BCDState:
    """Mutable iterate owned by one estimate() run"""

    def __init__(self, s, layout, lam, omega, sigma, cfg):
        self.s = s
        self.layout = layout
        self.lam = lam
        self.omega = omega
        self.sigma = sigma
        self.cfg = cfg
        self.steps = np.full(layout.node_count, cfg.initial_step)
        self.value = _objective(omega, s, lam, layout)
        self.halvings = 0

    def resync(self):
        """Recompute Sigma and the objective from Omega to drop accumulated drift"""
        try:
            factor = scipy.linalg.cho_factor(self.omega, lower=True)
        except np.linalg.LinAlgError:
            raise NumericalError("iterate left the positive definite cone")
        sigma = scipy.linalg.cho_solve(factor, np.eye(self.layout.total_dim))
        self.sigma = (sigma + sigma.T) / 2.0
        self.value = _objective(self.omega, self.s, self.lam, self.layout)


def node_update(state, a):
    """
    One generalized gradient step on row/column a; returns the step halvings used

    The step is accepted only if the new Omega is PD and the full objective
    does not increase (beyond DESCENT_TOL). Otherwise t_a is halved; the
    halved value carries over to later visits until estimate() starts the
    next sweep.
    """
    layout, lam = state.layout, state.lam
    idx_a = layout.indices([a])
    rest = layout.complement(a)
    k_a = len(idx_a)

    w, logdet_sigma_aa = _complement_inverse(state.sigma, idx_a, rest)
    old_strip = state.omega[idx_a, :]
    grad = state.sigma[idx_a, :] - state.s[idx_a, :]
    s_strip = state.s[idx_a, :]
    old_norms = block_norms(old_strip, AttributeLayout((k_a,)), layout)[0]
    # off-diagonal blocks appear twice in the symmetric objective
    weights = np.full(layout.node_count, 2.0)
    weights[a] = 1.0
    col_weights = np.repeat(weights, layout.attr_counts)

    halvings = 0
    while True:
        t = state.steps[a]
        if t < state.cfg.min_step:
            raise NumericalError(f"step size fell below {state.cfg.min_step:g} at node {a}",
                                 node=int(a), step=float(t))
        new_strip = _prox_strip(old_strip + t * grad, t, lam, layout, k_a)
        new_strip[:, idx_a] = (new_strip[:, idx_a] + new_strip[:, idx_a].T) / 2.0
        schur = _schur(new_strip[:, idx_a], new_strip[:, rest], w)
        logdet_schur = log_det(schur)
        if logdet_schur is not None:
            # log|Omega| = log|Omega_rr| + log|schur|, and log|old schur| = -log|Sigma_aa|
            delta_logdet = logdet_schur + logdet_sigma_aa
            delta_tr = float(np.sum(s_strip * (new_strip - old_strip) * col_weights))
            new_norms = block_norms(new_strip, AttributeLayout((k_a,)), layout)[0]
            delta_pen = lam * float(np.sum(weights * (new_norms - old_norms)))
            delta = delta_tr - delta_logdet + delta_pen
            if delta <= config.DESCENT_TOL:
                break
        state.steps[a] = t / 2.0
        halvings += 1

    new_sigma = _assemble_sigma(new_strip[:, idx_a], new_strip[:, rest], w,
                                idx_a, rest, layout.total_dim)
    state.omega[idx_a, :] = new_strip
    state.omega[:, idx_a] = new_strip.T
    state.sigma = new_sigma
    state.value += delta
    state.halvings += halvings
    return halvings


# ============================================
# DUALITY GAP
# ============================================

def _dual_violations(sigma, s, layout):
    return block_norms(sigma - s, layout)


def _clip_to_dual(sigma, s, lam, layout):
    """Pull every block with ||Sigma_ab - S_ab||_F > lam back to distance lam"""
    norms = _dual_violations(sigma, s, layout)
    with np.errstate(divide="ignore"):
        scale = np.where(norms > lam, lam / norms, 1.0)
    full_scale = np.repeat(np.repeat(scale, layout.attr_counts, axis=0),
                           layout.attr_counts, axis=1)
    out = s + (sigma - s) * full_scale
    return (out + out.T) / 2.0


def _gap(omega, sigma_feas, s, lam, layout):
    logdet_omega = log_det(omega)
    logdet_sigma = log_det(sigma_feas)
    if logdet_omega is None or logdet_sigma is None:
        raise InputError("duality gap needs positive definite primal and dual points")
    primal = (float(np.sum(s * omega)) - logdet_omega
              + lam * float(np.sum(block_norms(omega, layout))))
    dual = layout.total_dim + logdet_sigma
    return primal - dual


def duality_gap(omega, sigma_feas, s, lam):
    """Primal minus dual objective; sigma_feas must satisfy max ||S_ab - Sigma_ab||_F <= lam"""
    layout = omega.layout
    worst = float(_dual_violations(sigma_feas.data, s.data, layout).max())
    if worst > lam * (1.0 + 1e-9):
        raise InputError(f"dual point is infeasible: block distance {worst:.6g} > {lam:g}",
                         violation=worst)
    return _gap(omega.data, sigma_feas.data, s.data, lam, layout)


def _dual_feasible(sigma, omega, s, lam, layout):
    clipped = _clip_to_dual(sigma, s, lam, layout)
    if log_det(clipped) is not None:
        return clipped
    eye = np.eye(layout.total_dim)
    delta = 1e-10
    for _ in range(config.MAX_DELTA_DOUBLINGS):
        try:
            factor = scipy.linalg.cho_factor(omega + delta * eye, lower=True)
            candidate = scipy.linalg.cho_solve(factor, eye)
        except np.linalg.LinAlgError:
            candidate = None
        if candidate is not None:
            candidate = _clip_to_dual((candidate + candidate.T) / 2.0, s, lam, layout)
            if log_det(candidate) is not None:
                logger.debug("dual repair needed delta=%.3g", delta)
                return candidate
        delta *= 2.0
    return None


def _full_block_norms(m, layout):
    counts = layout.attr_counts
    return np.repeat(np.repeat(block_norms(m, layout), counts, axis=0), counts, axis=1)


def _kkt_dual(sigma, omega, s, lam, layout):
    """
    Dual point read off the optimality conditions at Omega

    Blocks where Omega is nonzero get S_ab + lam Omega_ab / ||Omega_ab||_F,
    the rest are clipped from Sigma. The gap at this point equals
    tr(W Omega) - log|W Omega| - d, so it shrinks with the square of the
    KKT residual instead of linearly.
    """
    norms = _full_block_norms(omega, layout)
    active = norms > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        direction = np.where(active, omega / norms, 0.0)
    out = np.where(active, s + lam * direction, _clip_to_dual(sigma, s, lam, layout))
    return (out + out.T) / 2.0


def _best_dual(sigma, omega, s, lam, layout):
    """Largest dual objective d + log|W| over the available candidates; None if none is PD"""
    values = []
    logdet = log_det(_kkt_dual(sigma, omega, s, lam, layout))
    if logdet is not None:
        values.append(logdet)
    repaired = _dual_feasible(sigma, omega, s, lam, layout)
    if repaired is not None:
        values.append(log_det(repaired))
    if not values:
        return None
    return layout.total_dim + max(values)


def _kkt_residual(omega, sigma, s, lam, layout):
    grad = s - sigma
    norms = block_norms(omega, layout)
    full = _full_block_norms(omega, layout)
    active = full > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        r_active = np.where(active, grad + lam * omega / full, 0.0)
    on = block_norms(r_active, layout)
    off = np.maximum(block_norms(np.where(active, 0.0, grad), layout) - lam, 0.0)
    return float(np.max(np.where(norms > 0, on, off)))


def make_dual_feasible(sigma_hat, s, lam, omega_hat=None):
    """
    Dual-feasible, PD covariance near sigma_hat, or None if repair fails

    Blocks violating the constraint are shrunk toward S_ab onto the boundary.
    If that breaks PD, (Omega + delta I)^-1 is clipped instead, doubling delta
    from 1e-10 up to 50 times.
    """
    layout = sigma_hat.layout
    omega = (omega_hat.data if omega_hat is not None
             else np.linalg.inv(sigma_hat.data))
    out = _dual_feasible(sigma_hat.data, omega, s.data, lam, layout)
    return None if out is None else BlockSymMatrix(layout, out)


# ============================================
# ESTIMATION
# ============================================

def _check_diagonal_blocks(s, layout):
    for a in range(layout.node_count):
        block = s[layout.span(a), layout.span(a)]
        if log_det(block) is None:
            raise NumericalError(f"diagonal block of S for node {a} is not positive definite",
                                 node=int(a))


def _initial_point(s, layout, cfg):
    if cfg.init == "random":
        rng = np.random.default_rng(cfg.init_seed)
        a = rng.standard_normal((layout.total_dim, layout.total_dim))
        omega = a @ a.T / layout.total_dim + np.eye(layout.total_dim)
        return omega, np.linalg.inv(omega)
    # block diagonal of S, inverted blockwise
    omega = np.zeros_like(s)
    sigma = np.zeros_like(s)
    for a in range(layout.node_count):
        span = layout.span(a)
        omega[span, span] = s[span, span]
        sigma[span, span] = np.linalg.inv(s[span, span])
    return omega, (sigma + sigma.T) / 2.0


def _gap_stalled(gaps):
    window = config.GAP_STALL_SWEEPS
    if len(gaps) <= window or gaps[-1 - window] is None:
        return False
    return gaps[-1] > config.GAP_STALL_RATIO * gaps[-1 - window]


def estimate(cov, cfg, warm_start=None):
    """
    Fit Omega-hat for one penalty value

    cov is a CovEstimate (or a BlockSymMatrix S). warm_start is an optional
    (omega, sigma) pair of BlockSymMatrix from a previous fit.

    Stops once the duality gap is within cfg.epsilon and the KKT residual
    within cfg.kkt_tol. When no dual point can be built, or the gap has
    stalled, a relative objective change of at most 1e-8 over one sweep
    also ends the run. Step sizes restart from cfg.initial_step each sweep.
    """
    s_mat = getattr(cov, "s", cov)
    layout = s_mat.layout
    s = s_mat.data
    _check_diagonal_blocks(s, layout)

    if warm_start is not None:
        omega = warm_start[0].data.copy()
        sigma = warm_start[1].data.copy()
    else:
        omega, sigma = _initial_point(s, layout, cfg)

    state = BCDState(s, layout, cfg.lam, omega, sigma, cfg)
    state.resync()
    trace = [state.value]
    gaps = []
    stop_reason = "max_sweeps"
    best_dual = -np.inf
    gap = None
    sweeps = 0

    while True:
        # any earlier dual point is still feasible for this lambda
        dual = _best_dual(state.sigma, state.omega, s, cfg.lam, layout)
        if dual is not None:
            best_dual = max(best_dual, dual)
        gap = state.value - best_dual if np.isfinite(best_dual) else None
        gaps.append(gap)
        kkt = _kkt_residual(state.omega, state.sigma, s, cfg.lam, layout)
        if gap is not None and abs(gap) <= cfg.epsilon and kkt <= cfg.kkt_tol:
            stop_reason = "gap"
            break
        if sweeps > 0 and (gap is None or _gap_stalled(gaps)):
            before = trace[-1 - layout.node_count]
            if abs(before - trace[-1]) <= config.FALLBACK_REL_CHANGE * max(1.0, abs(before)):
                stop_reason = "objective"
                break
        if sweeps >= cfg.max_sweeps:
            break
        state.steps[:] = cfg.initial_step
        for a in range(layout.node_count):
            node_update(state, a)
            trace.append(state.value)
        sweeps += 1
        state.resync()
        logger.debug("sweep %d: objective %.10g gap %s kkt %.3g", sweeps, state.value, gap, kkt)

    converged = stop_reason != "max_sweeps"
    if not converged:
        warnings.warn(f"solver stopped after {sweeps} sweeps with gap {gap}",
                      ConvergenceWarning)
    logger.info("lambda=%.4g: %d sweeps, gap %s, kkt %.3g, %d halvings (%s)",
                cfg.lam, sweeps, gap, kkt, state.halvings, stop_reason)
    return SolverReport(
        omega_hat=BlockSymMatrix(layout, state.omega),
        sigma_hat=BlockSymMatrix(layout, state.sigma),
        objective_trace=trace,
        final_gap=gap,
        sweeps=sweeps,
        step_halvings=state.halvings,
        converged=converged,
        lam=cfg.lam,
        gap_trace=gaps,
        final_kkt=kkt,
        stop_reason=stop_reason,
    )


# ============================================
# CERTIFICATES AND GRAPH READ-OUT
# ============================================

def kkt_residual(omega_hat, s, lam):
    """Largest block violation of the optimality conditions"""
    omega = omega_hat.data
    return _kkt_residual(omega, np.linalg.inv(omega), s.data, lam, omega_hat.layout)


def graph_from_precision(omega_hat):
    """Edges wherever an off-diagonal block is not exactly zero"""
    norms = block_norms(omega_hat.data, omega_hat.layout)
    graph = nx.Graph()
    graph.add_nodes_from(range(omega_hat.p))
    for a, b in zip(*np.nonzero(np.triu(norms, k=1))):
        graph.add_edge(int(a), int(b), weight=float(norms[a, b]))
    return graph


def edge_table(omega_hat):
    """node_a, node_b, frobenius_norm rows, smallest index first, sorted"""
    graph = graph_from_precision(omega_hat)
    rows = sorted((min(a, b), max(a, b), d["weight"]) for a, b, d in graph.edges(data=True))
    return pd.DataFrame(rows, columns=["node_a", "node_b", "frobenius_norm"])


def within_node_partial_correlations(omega_hat, a):
    """Partial correlations among the attributes of node a: -w_ij / sqrt(w_ii w_jj)"""
    block = omega_hat.block(a, a)
    d = np.sqrt(np.diag(block))
    out = -block / np.outer(d, d)
    np.fill_diagonal(out, 1.0)
    return out
