"""
Small-instance recovery diagnostics: Hessian, irrepresentability, kappa
constants and the penalty / sample-size / signal-strength bounds for exact
graph recovery
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.linalg

import config
from blockmat import AttributeLayout, block_norms, c_operator, linf_op_norm
from errors import InputError, NumericalError

logger = logging.getLogger(__name__)


@dataclass
class TheoryDiagnostics:
    alpha_irrep: float
    kappa_sigma: float
    kappa_h: float
    lambda_prop1: Optional[float]
    n_min_prop1: Optional[float]
    min_signal: Optional[float]
    min_signal_required: Optional[float] = None
    sigma_max: float = 1.0
    max_degree: int = 0
    k: int = 1
    p: int = 1

    @property
    def guaranteed(self):
        """False when the irrepresentable condition fails (alpha <= 0)"""
        return self.alpha_irrep > 0

    @property
    def signal_sufficient(self):
        """Whether the weakest edge block clears the required signal; None if unknown"""
        if self.min_signal is None or self.min_signal_required is None:
            return None
        return self.min_signal >= self.min_signal_required

    def to_dict(self):
        out = asdict(self)
        out["guaranteed"] = self.guaranteed
        out["signal_sufficient"] = self.signal_sufficient
        if not self.guaranteed:
            out["note"] = "theory does not guarantee recovery"
        return out


# ============================================
# HESSIAN
# ============================================

def hessian(omega_star):
    """Sigma* kron Sigma*, the Hessian of tr(SA) - log|A| at Omega*"""
    dim = omega_star.layout.total_dim
    if dim > config.HESSIAN_MAX_DIM:
        raise NumericalError(f"Hessian needs total dimension <= {config.HESSIAN_MAX_DIM}, "
                             f"got {dim}", total_dim=dim)
    try:
        factor = scipy.linalg.cho_factor(omega_star.data, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("precision matrix is not positive definite")
    sigma = scipy.linalg.cho_solve(factor, np.eye(dim))
    sigma = (sigma + sigma.T) / 2.0
    return np.kron(sigma, sigma)


def pair_indices(layout, pairs):
    """
    Rows of the Hessian for node pairs, column-major inside each block

    Entry (i, j) of block (a, b) sits at vec index j * d + i.
    """
    dim = layout.total_dim
    out = []
    for a, b in pairs:
        rows, cols = layout.span(a), layout.span(b)
        out.extend(j * dim + i for j in range(cols.start, cols.stop)
                   for i in range(rows.start, rows.stop))
    return np.asarray(out, dtype=int)


def pair_layout(layout, pairs):
    counts = layout.attr_counts
    return AttributeLayout(tuple(counts[a] * counts[b] for a, b in pairs))


def support(omega_star):
    """(T, N): ordered pairs with nonzero blocks (always including the diagonal) and the rest"""
    norms = c_operator(omega_star)
    p = omega_star.p
    pairs = [(a, b) for a in range(p) for b in range(p)]
    t = [(a, b) for a, b in pairs if a == b or norms[a, b] != 0]
    n = [(a, b) for a, b in pairs if a != b and norms[a, b] == 0]
    return t, n


# ============================================
# DIAGNOSTICS
# ============================================

def irrepresentability(omega_star, tau=config.TAU, gamma=config.GAMMA, n=None):
    """
    Irrepresentable constant, kappa values and the recovery bounds

    lambda_prop1 is evaluated at n when given, otherwise at n_min_prop1.
    """
    layout = omega_star.layout
    h = hessian(omega_star)
    t_pairs, n_pairs = support(omega_star)
    t_idx = pair_indices(layout, t_pairs)
    n_idx = pair_indices(layout, n_pairs)

    h_tt = h[np.ix_(t_idx, t_idx)]
    try:
        factor = scipy.linalg.cho_factor(h_tt, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("H_TT is singular")
    h_tt_inv = scipy.linalg.cho_solve(factor, np.eye(len(t_idx)))
    t_layout = pair_layout(layout, t_pairs)
    kappa_h = linf_op_norm(block_norms(h_tt_inv, t_layout))

    if n_pairs:
        # H symmetric: H_NT H_TT^-1 = (H_TT^-1 H_TN)^T
        m = scipy.linalg.cho_solve(factor, h[np.ix_(t_idx, n_idx)]).T
        alpha = 1.0 - linf_op_norm(block_norms(m, pair_layout(layout, n_pairs), t_layout))
    else:
        alpha = 1.0

    sigma = np.linalg.inv(omega_star.data)
    norms = c_operator(omega_star)
    edges = [norms[a, b] for a, b in t_pairs if a < b]
    diag = TheoryDiagnostics(
        alpha_irrep=float(alpha),
        kappa_sigma=linf_op_norm(block_norms(sigma, layout)),
        kappa_h=kappa_h,
        lambda_prop1=None,
        n_min_prop1=None,
        min_signal=float(min(edges)) if edges else None,
        sigma_max=float(np.max(np.diag(sigma))),
        max_degree=int(max(sum(1 for a, b in t_pairs if a == c and b != c)
                           for c in range(omega_star.p))),
        k=max(layout.attr_counts),
        p=omega_star.p,
    )
    if not diag.guaranteed:
        logger.warning("alpha=%.4f <= 0: theory does not guarantee recovery", alpha)
        return diag

    s = max(diag.max_degree, 1)
    diag.n_min_prop1 = prop1_sample_bound(diag, s, diag.k, diag.p, tau, gamma, diag.sigma_max)
    n_eval = n if n is not None else diag.n_min_prop1
    diag.lambda_prop1 = prop1_lambda(diag.sigma_max, gamma, diag.k, diag.p, n_eval, tau, alpha)
    diag.min_signal_required = prop1_min_signal(diag, diag.k, diag.p, n_eval, tau, gamma,
                                                diag.sigma_max)
    return diag


def _check_domain(tau, alpha, n=1.0):
    if not tau > 2:
        raise InputError(f"tau must exceed 2, got {tau}")
    if not 0 < alpha <= 1:
        raise InputError(f"alpha must lie in (0, 1], got {alpha}")
    if not n >= 1:
        raise InputError(f"n must be at least 1, got {n}")


def prop1_lambda(sigma_max_diag, gamma, k, p, n, tau, alpha):
    """8 k / alpha * sqrt(128 (1+4 gamma^2)^2 sigma_max^2 / n * (2 log 2k + tau log p))"""
    _check_domain(tau, alpha, n)
    inner = (128.0 * (1.0 + 4.0 * gamma ** 2) ** 2 * sigma_max_diag ** 2 / n
             * (2.0 * math.log(2.0 * k) + tau * math.log(p)))
    return 8.0 * k / alpha * math.sqrt(inner)


def _c1(diag, gamma, sigma_max):
    ks, kh = diag.kappa_sigma, diag.kappa_h
    return (48.0 * math.sqrt(2.0) * (1.0 + 4.0 * gamma ** 2) * sigma_max
            * max(ks * kh, ks ** 3 * kh ** 2)) ** 2


def prop1_sample_bound(diag, s, k, p, tau, gamma, sigma_max):
    """C1 s^2 k^2 (1 + 8/alpha)^2 (tau log p + log 4 + 2 log k)"""
    _check_domain(tau, diag.alpha_irrep)
    return (_c1(diag, gamma, sigma_max) * s ** 2 * k ** 2
            * (1.0 + 8.0 / diag.alpha_irrep) ** 2
            * (tau * math.log(p) + math.log(4.0) + 2.0 * math.log(k)))


def prop1_min_signal(diag, k, p, n, tau, gamma, sigma_max):
    """Smallest edge-block Frobenius norm the recovery guarantee tolerates"""
    _check_domain(tau, diag.alpha_irrep, n)
    return (16.0 * math.sqrt(2.0) * (1.0 + 4.0 * gamma ** 2) * sigma_max
            * (1.0 + 8.0 / diag.alpha_irrep) * diag.kappa_h * k
            * math.sqrt((tau * math.log(p) + math.log(4.0) + 2.0 * math.log(k)) / n))


def recovery_probability_bound(p, tau):
    """Lower bound 1 - p^(2 - tau) on the chance of exact recovery"""
    return 1.0 - float(p) ** (2.0 - tau)
