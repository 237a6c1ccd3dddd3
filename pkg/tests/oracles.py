"""
Independent reference computations used to check the library

Each works on flat numpy arrays and shares no code with the modules under test.
"""
import numpy as np


def _soft(x, t):
    return np.sign(x) * max(abs(x) - t, 0.0)


def scalar_glasso(s, lam, tol=1e-12, max_iter=2000):
    """
    Graphical lasso by column-wise coordinate descent, diagonal penalized

    Minimizes tr(S Theta) - log|Theta| + lam * sum_ij |theta_ij|, so the
    optimal covariance has W_ii = S_ii + lam.
    """
    p = s.shape[0]
    w = s + lam * np.eye(p)
    beta = np.zeros((p, p - 1))
    for _ in range(max_iter):
        w_old = w.copy()
        for j in range(p):
            rest = [i for i in range(p) if i != j]
            w11 = w[np.ix_(rest, rest)]
            s12 = s[rest, j]
            b = beta[j]
            for _ in range(max_iter):
                b_old = b.copy()
                for i in range(p - 1):
                    r = s12[i] - w11[i] @ b + w11[i, i] * b[i]
                    b[i] = _soft(r, lam) / w11[i, i]
                if np.max(np.abs(b - b_old)) < tol:
                    break
            beta[j] = b
            w12 = w11 @ b
            w[rest, j] = w12
            w[j, rest] = w12
        if np.max(np.abs(w - w_old)) < tol:
            break
    theta = np.zeros((p, p))
    for j in range(p):
        rest = [i for i in range(p) if i != j]
        theta[j, j] = 1.0 / (w[j, j] - w[rest, j] @ beta[j])
        theta[rest, j] = -beta[j] * theta[j, j]
    return (theta + theta.T) / 2.0


def flat_irrepresentability(omega):
    """(alpha, kappa_sigma, kappa_h) for one attribute per node, using flat indices"""
    p = omega.shape[0]
    sigma = np.linalg.inv(omega)
    h = np.zeros((p * p, p * p))
    for i in range(p):
        for j in range(p):
            for k in range(p):
                for l in range(p):
                    # vec index of (i, j) is j * p + i
                    h[j * p + i, l * p + k] = sigma[i, k] * sigma[j, l]
    support = [j * p + i for j in range(p) for i in range(p) if omega[i, j] != 0 or i == j]
    others = [j * p + i for j in range(p) for i in range(p) if omega[i, j] == 0 and i != j]
    h_tt_inv = np.linalg.inv(h[np.ix_(support, support)])
    kappa_h = np.max(np.sum(np.abs(h_tt_inv), axis=1))
    kappa_sigma = np.max(np.sum(np.abs(sigma), axis=1))
    if not others:
        return 1.0, kappa_sigma, kappa_h
    m = h[np.ix_(others, support)] @ h_tt_inv
    return 1.0 - np.max(np.sum(np.abs(m), axis=1)), kappa_sigma, kappa_h


def max_canonical_correlation(s_aa, s_bb, s_ab, seed=0, step=10.0, iters=20000):
    """
    Largest corr(w_a' X_a, w_b' X_b) by projected gradient ascent

    Works in whitened coordinates u = L_a' w_a, v = L_b' w_b, where the
    objective is u' A v over unit vectors u and v.
    """
    la = np.linalg.cholesky(s_aa)
    lb = np.linalg.cholesky(s_bb)
    a = np.linalg.solve(la, np.linalg.solve(lb, s_ab.T).T)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(a.shape[0])
    v = rng.standard_normal(a.shape[1])
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        u = u + step * (a @ v)
        u /= np.linalg.norm(u)
        v = v + step * (a.T @ u)
        v /= np.linalg.norm(v)
    return abs(float(u @ a @ v))
