"""
Block-addressable symmetric matrices over stacked node attributes

A layout maps p nodes with k_1..k_p attributes onto a (sum k_a)-dimensional
space; block (a, b) of a matrix is the k_a x k_b submatrix at
(offsets[a], offsets[b]).
"""
import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from config import SYMMETRY_TOL
from errors import InputError


# ============================================
# LAYOUT
# ============================================

@dataclass(frozen=True)
class AttributeLayout:
    attr_counts: tuple

    def __post_init__(self):
        counts = tuple(int(k) for k in self.attr_counts)
        if not counts:
            raise InputError("layout needs at least one node")
        if any(k < 1 for k in counts):
            raise InputError("every node needs at least one attribute",
                             attr_counts=list(counts))
        object.__setattr__(self, "attr_counts", counts)
        object.__setattr__(self, "offsets",
                           np.concatenate([[0], np.cumsum(counts)]).astype(int))

    @classmethod
    def uniform(cls, p, k):
        return cls((k,) * p)

    @property
    def node_count(self):
        return len(self.attr_counts)

    @property
    def total_dim(self):
        return int(self.offsets[-1])

    def span(self, a):
        """Column slice of node a in the stacked space"""
        self._check_node(a)
        return slice(int(self.offsets[a]), int(self.offsets[a + 1]))

    def indices(self, nodes):
        """Stacked column indices of a list of nodes, in the given order"""
        nodes = list(nodes)
        if not nodes:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.arange(self.span(a).start, self.span(a).stop)
                               for a in nodes])

    def complement(self, a):
        """Stacked indices of every node except a"""
        return self.indices([b for b in range(self.node_count) if b != a])

    def subset(self, nodes):
        """Layout restricted to nodes (renumbered 0..len-1)"""
        return AttributeLayout(tuple(self.attr_counts[a] for a in nodes))

    def _check_node(self, a):
        if not 0 <= a < self.node_count:
            raise InputError(f"node index {a} out of range",
                             node=int(a), node_count=self.node_count)

    def to_dict(self):
        return {"attr_counts": list(self.attr_counts)}

    @classmethod
    def from_json(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as f:
                payload = json.load(f)
            return cls(tuple(payload["attr_counts"]))
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise InputError(f"cannot read layout from {path}: {e}", path=str(path))

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)


# ============================================
# BLOCK SYMMETRIC MATRIX
# ============================================

def _symmetrize(data):
    scale = max(1.0, float(np.max(np.abs(data)))) if data.size else 1.0
    asym = float(np.max(np.abs(data - data.T))) if data.size else 0.0
    if asym > SYMMETRY_TOL * scale:
        raise InputError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e})",
                         asymmetry=asym)
    return (data + data.T) / 2.0


class BlockSymMatrix:
    """Dense symmetric matrix addressed by node blocks"""

    def __init__(self, layout, data):
        data = np.array(data, dtype=float)
        dim = layout.total_dim
        if data.shape != (dim, dim):
            raise InputError(f"matrix shape {data.shape} does not match layout "
                             f"dimension {dim}", shape=list(data.shape), total_dim=dim)
        if not np.all(np.isfinite(data)):
            raise InputError("matrix has non-finite entries")
        self.layout = layout
        self.data = _symmetrize(data)

    @classmethod
    def identity(cls, layout):
        return cls(layout, np.eye(layout.total_dim))

    @classmethod
    def zeros(cls, layout):
        return cls(layout, np.zeros((layout.total_dim, layout.total_dim)))

    @property
    def p(self):
        return self.layout.node_count

    def block(self, a, b):
        return self.data[self.layout.span(a), self.layout.span(b)].copy()

    def set_block(self, a, b, values):
        """Write block (a, b) and its mirror (b, a)"""
        ra, rb = self.layout.span(a), self.layout.span(b)
        values = np.asarray(values, dtype=float)
        expected = (ra.stop - ra.start, rb.stop - rb.start)
        if values.shape != expected:
            raise InputError(f"block ({a},{b}) needs shape {expected}, got {values.shape}",
                             expected=list(expected), got=list(values.shape))
        if a == b:
            values = _symmetrize(values)
        self.data[ra, rb] = values
        self.data[rb, ra] = values.T

    def submatrix(self, nodes):
        """Principal block submatrix over nodes, as a new BlockSymMatrix"""
        idx = self.layout.indices(nodes)
        return BlockSymMatrix(self.layout.subset(nodes), self.data[np.ix_(idx, idx)])

    def copy(self):
        return BlockSymMatrix(self.layout, self.data.copy())

    def __repr__(self):
        return f"BlockSymMatrix(p={self.p}, total_dim={self.layout.total_dim})"

    def to_csv(self, path):
        write_matrix_csv(self.data, path)

    @classmethod
    def from_csv(cls, path, layout):
        return cls(layout, read_matrix_csv(path))


def block_get(m, a, b):
    return m.block(a, b)


def block_set(m, a, b, values):
    m.set_block(a, b, values)


# ============================================
# BLOCK NORMS
# ============================================

def block_norms(data, row_layout, col_layout=None):
    """Frobenius norm of every block of a (not necessarily symmetric) matrix"""
    col_layout = col_layout or row_layout
    data = np.asarray(data, dtype=float)
    if data.shape != (row_layout.total_dim, col_layout.total_dim):
        raise InputError("matrix shape does not match layouts", shape=list(data.shape))
    # sum squares over each block via reduceat on the offsets
    sq = np.add.reduceat(data ** 2, row_layout.offsets[:-1], axis=0)
    sq = np.add.reduceat(sq, col_layout.offsets[:-1], axis=1)
    return np.sqrt(sq)


def c_operator(m):
    """p x p matrix of block Frobenius norms"""
    out = block_norms(m.data, m.layout)
    return (out + out.T) / 2.0


def linf_op_norm(b):
    """Maximum absolute row sum"""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if b.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(b), axis=1)))


def max_offdiag_block_norm(m):
    if m.p < 2:
        return 0.0
    norms = c_operator(m)
    np.fill_diagonal(norms, 0.0)
    return float(norms.max())


# ============================================
# CSV I/O
# ============================================

def read_matrix_csv(path):
    """Read a numeric CSV; a non-numeric first row is treated as a header"""
    try:
        df = pd.read_csv(path, header=None, dtype=str, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"cannot read {path}: {e}", path=str(path))
    first = pd.to_numeric(df.iloc[0], errors="coerce")
    if first.isna().any():
        df = df.iloc[1:]
    try:
        return df.apply(pd.to_numeric).to_numpy(dtype=float)
    except ValueError as e:
        raise InputError(f"non-numeric entry in {path}: {e}", path=str(path))


def write_matrix_csv(data, path, header=None):
    df = pd.DataFrame(np.atleast_2d(np.asarray(data, dtype=float)), columns=header)
    df.to_csv(path, header=header is not None, index=False, float_format="%.17g")
