"""
Edge interpretation: Markov blankets, residual correlations and partial
canonical correlations with attribute weights
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
import scipy.linalg

import config
from blockmat import AttributeLayout, BlockSymMatrix
from errors import InputError, NumericalError

logger = logging.getLogger(__name__)

ATTRIBUTE1 = "attribute1-influenced"
ATTRIBUTE2 = "attribute2-influenced"
MIXED = "mixed"
EDGE_CLASSES = (ATTRIBUTE1, ATTRIBUTE2, MIXED)


@dataclass
class EdgeInterpretation:
    a: int
    b: int
    rho: float
    w_a: np.ndarray
    w_b: np.ndarray
    degenerate: bool = False

    @property
    def edge(self):
        return (self.a, self.b)


@dataclass
class EdgeClass:
    label: str
    w_sq: float


@dataclass
class NodeClass:
    proportions: Optional[tuple]

    @property
    def defined(self):
        return self.proportions is not None


# ============================================
# BLANKETS AND CONDITIONAL COVARIANCE
# ============================================

def markov_blanket(graph, a, b):
    """Neighbours of a or b, excluding a and b themselves"""
    if a == b:
        raise InputError("markov blanket needs two distinct nodes")
    return sorted((set(graph.neighbors(a)) | set(graph.neighbors(b))) - {a, b})


def _residuals(y, z, ridge):
    if z.shape[1] == 0:
        return y - y.mean(axis=0)
    zc = z - z.mean(axis=0)
    yc = y - y.mean(axis=0)
    if ridge > 0:
        coef = scipy.linalg.solve(zc.T @ zc + ridge * np.eye(zc.shape[1]), zc.T @ yc,
                                  assume_a="pos")
    else:
        coef, _, rank, _ = scipy.linalg.lstsq(zc, yc)
        if rank < zc.shape[1]:
            raise NumericalError("blanket design is rank deficient; retry with a ridge penalty "
                                 "(--ridge)", rank=int(rank), columns=int(zc.shape[1]))
    return yc - zc @ coef


def conditional_cov(d, a, b, blanket, ridge=0.0):
    """
    Correlation matrix of least-squares residuals of X_a and X_b on X_blanket

    Returned as a two-node BlockSymMatrix: blocks (0,0), (1,1) are the
    residual correlations of a and b, block (0,1) their cross-correlation.
    """
    layout = d.layout
    z = d.node_values(blanket)
    ka, kb = layout.attr_counts[a], layout.attr_counts[b]
    if d.n <= z.shape[1] + ka + kb:
        raise InputError(f"need more than {z.shape[1] + ka + kb} samples to regress "
                         f"on the blanket, have {d.n}")
    ra = _residuals(d.node_values([a]), z, ridge)
    rb = _residuals(d.node_values([b]), z, ridge)
    r = np.hstack([ra, rb])
    sd = r.std(axis=0)
    if np.any(sd <= 1e-12 * max(1.0, float(np.abs(d.values).max()))):
        raise NumericalError(f"residuals of edge ({a},{b}) have zero variance; "
                             "an attribute is explained exactly by the blanket")
    return BlockSymMatrix(AttributeLayout((ka, kb)), np.corrcoef(r, rowvar=False))


def population_conditional_cov(sigma, a, b):
    """Var((X_a, X_b) | rest) from a population covariance"""
    layout = sigma.layout
    pair = layout.indices([a, b])
    rest = layout.indices([c for c in range(layout.node_count) if c not in (a, b)])
    s = sigma.data
    cond = s[np.ix_(pair, pair)]
    if len(rest):
        cross = s[np.ix_(pair, rest)]
        cond = cond - cross @ scipy.linalg.solve(s[np.ix_(rest, rest)], cross.T, assume_a="pos")
    return BlockSymMatrix(AttributeLayout((layout.attr_counts[a], layout.attr_counts[b])),
                          (cond + cond.T) / 2.0)


# ============================================
# PARTIAL CANONICAL CORRELATION
# ============================================

def _sign_fix(w):
    w = w / np.linalg.norm(w)
    return -w if w[np.argmax(np.abs(w))] < 0 else w


def _top_generalized(num, den):
    """Largest eigenpair of num w = phi^2 den w"""
    values, vectors = scipy.linalg.eigh(num, den)
    return float(values[-1]), vectors[:, -1]


def one_sided_eigenvalues(cond):
    """Top eigenvalue of each side of the eigenvalue system (they agree)"""
    s_aa, s_bb, s_ab = cond.block(0, 0), cond.block(1, 1), cond.block(0, 1)
    top_a, _ = _top_generalized(s_ab @ np.linalg.solve(s_bb, s_ab.T), s_aa)
    top_b, _ = _top_generalized(s_ab.T @ np.linalg.solve(s_aa, s_ab), s_bb)
    return top_a, top_b


def pcc_eigensystem(cond, edge=(0, 1)):
    """
    Partial canonical correlation and attribute weights for one edge

    Solves S_aa^-1 S_ab S_bb^-1 S_ba w_a = phi^2 w_a (and the mirrored system
    for w_b) as symmetric-definite generalized eigenproblems. Weights are unit
    norm with their largest-magnitude entry positive.
    """
    s_aa, s_bb, s_ab = cond.block(0, 0), cond.block(1, 1), cond.block(0, 1)
    for name, block in (("a", s_aa), ("b", s_bb)):
        try:
            scipy.linalg.cholesky(block)
        except np.linalg.LinAlgError:
            raise NumericalError(f"marginal block {name} of edge {edge} is not positive definite")
    ka, kb = s_ab.shape
    if np.linalg.norm(s_ab) <= 1e-14:
        return EdgeInterpretation(edge[0], edge[1], 0.0, np.eye(ka)[0], np.eye(kb)[0],
                                  degenerate=True)
    phi_sq, w_a = _top_generalized(s_ab @ np.linalg.solve(s_bb, s_ab.T), s_aa)
    _, w_b = _top_generalized(s_ab.T @ np.linalg.solve(s_aa, s_ab), s_bb)
    rho = float(np.sqrt(np.clip(phi_sq, 0.0, 1.0)))
    return EdgeInterpretation(edge[0], edge[1], rho, _sign_fix(w_a), _sign_fix(w_b))


def interpret_edges(d, graph, ridge=0.0):
    """Interpretation of every edge of an estimated graph, blanket read off the graph"""
    out = []
    for a, b in sorted(tuple(sorted(e)) for e in graph.edges()):
        blanket = markov_blanket(graph, a, b)
        cond = conditional_cov(d, a, b, blanket, ridge=ridge)
        out.append(pcc_eigensystem(cond, edge=(a, b)))
        logger.debug("edge (%d,%d): rho=%.4f blanket=%s", a, b, out[-1].rho, blanket)
    return out


# ============================================
# CLASSIFICATION
# ============================================

def classify_edge(w_a, attr_index, threshold=config.CLASS_THRESHOLD):
    w = np.asarray(w_a, dtype=float)
    if not 0 <= attr_index < len(w):
        raise InputError(f"attribute index {attr_index} out of range for {len(w)} attributes")
    w_sq = float((w[attr_index] / np.linalg.norm(w)) ** 2)
    # open intervals: w_sq of exactly 0, T, 1 - T or 1 is mixed
    if 0.0 < w_sq < threshold:
        label = ATTRIBUTE1
    elif 1.0 - threshold < w_sq < 1.0:
        label = ATTRIBUTE2
    else:
        label = MIXED
    return EdgeClass(label, w_sq)


def classify_edges(interps, attr_index, threshold=config.CLASS_THRESHOLD):
    """Label each edge from the squared designated weight of its first node"""
    return {i.edge: classify_edge(i.w_a, attr_index, threshold) for i in interps}


def classify_nodes(edge_classes, graph):
    """Share of attribute1, attribute2 and mixed edges incident to each node"""
    out = {}
    for node in graph.nodes():
        labels = [c.label for e, c in edge_classes.items() if node in e]
        if not labels:
            out[node] = NodeClass(None)
            continue
        out[node] = NodeClass(tuple(labels.count(lab) / len(labels) for lab in EDGE_CLASSES))
    return out


def interpretation_table(interps, classes=None):
    rows = []
    for i in interps:
        row = {"a": i.a, "b": i.b, "rho": i.rho}
        row.update({f"w_a_{j}": v for j, v in enumerate(i.w_a)})
        row.update({f"w_b_{j}": v for j, v in enumerate(i.w_b)})
        if classes is not None:
            row["class"] = classes[i.edge].label
        rows.append(row)
    return pd.DataFrame(rows)


def node_class_table(node_classes):
    rows = []
    for node, c in sorted(node_classes.items()):
        p1, p2, p3 = c.proportions if c.defined else (None, None, None)
        rows.append({"node": node, "p1": p1, "p2": p2, "p3": p3, "defined": c.defined})
    return pd.DataFrame(rows)


# ============================================
# BLOCK ZERO EQUIVALENCE
# ============================================

def verify_block_zero_equivalence(sigma, a, b, tol=1e-10):
    """
    (conditional cross-covariance is zero, precision block is zero) for a pair

    Both are judged against tol scaled by the size of the matrix they come from.
    """
    cond = population_conditional_cov(sigma, a, b)
    omega = np.linalg.inv(sigma.data)
    layout = sigma.layout
    omega_ab = omega[layout.span(a), layout.span(b)]
    rho_zero = np.linalg.norm(cond.block(0, 1)) <= tol * max(1.0, np.abs(cond.data).max())
    omega_zero = np.linalg.norm(omega_ab) <= tol * max(1.0, np.abs(omega).max())
    return bool(rho_zero), bool(omega_zero)
