"""
Datasets, sample covariance (full and pairwise-complete) and Gaussian sampling
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from blockmat import BlockSymMatrix, read_matrix_csv, write_matrix_csv
from errors import InputError, NumericalError

logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    layout: object
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != self.layout.total_dim:
            raise InputError(f"dataset has {self.values.shape[1]} columns, layout "
                             f"expects {self.layout.total_dim}")
        if self.mask is not None:
            self.mask = np.asarray(self.mask).astype(bool)
            if self.mask.shape != self.values.shape:
                raise InputError(f"mask shape {self.mask.shape} does not match data "
                                 f"shape {self.values.shape}")
            # unobserved entries never contribute
            self.values = np.where(self.mask, self.values, 0.0)
        elif not np.all(np.isfinite(self.values)):
            raise InputError("dataset has non-finite entries; supply a mask")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def fully_observed(self):
        return self.mask is None or bool(self.mask.all())

    def rows(self, index):
        """Dataset restricted to the given sample rows"""
        mask = None if self.mask is None else self.mask[index]
        return Dataset(self.layout, self.values[index], mask)

    def node_values(self, nodes):
        return self.values[:, self.layout.indices(nodes)]

    @classmethod
    def from_csv(cls, path, layout, mask_path=None):
        values = read_matrix_csv(path)
        mask = None if mask_path is None else read_matrix_csv(mask_path)
        if mask is not None:
            values = np.nan_to_num(values)
        return cls(layout, values, mask)

    def to_csv(self, path, mask_path=None):
        write_matrix_csv(self.values, path)
        if mask_path is not None and self.mask is not None:
            write_matrix_csv(self.mask.astype(int), mask_path)


@dataclass
class CovEstimate:
    s: BlockSymMatrix
    n_eff: np.ndarray

    @property
    def layout(self):
        return self.s.layout


def _node_min_counts(counts, layout):
    """Minimum pairwise co-observation count over each node block"""
    out = np.minimum.reduceat(counts, layout.offsets[:-1], axis=0)
    return np.minimum.reduceat(out, layout.offsets[:-1], axis=1).astype(int)


def sample_covariance(d, center=False):
    """S = X^T X / n, after subtracting column means when center is set"""
    if d.n == 0:
        raise InputError("cannot estimate a covariance from zero samples")
    if not d.fully_observed:
        raise InputError("dataset has missing entries; use masked_covariance")
    x = d.values
    if center:
        x = x - x.mean(axis=0)
    s = x.T @ x / d.n
    p = d.layout.node_count
    return CovEstimate(BlockSymMatrix(d.layout, (s + s.T) / 2.0),
                       np.full((p, p), d.n, dtype=int))


def masked_covariance(d):
    """Pairwise-complete second moments: each entry averages over co-observed samples"""
    if d.n == 0:
        raise InputError("cannot estimate a covariance from zero samples")
    r = np.ones_like(d.values) if d.mask is None else d.mask.astype(float)
    counts = r.T @ r
    if np.any(counts < 1):
        l, k = (int(i) for i in np.argwhere(counts < 1)[0])
        node_of = np.searchsorted(d.layout.offsets, [l, k], side="right") - 1
        raise InputError(f"columns {l} and {k} are never observed together",
                         columns=[l, k], nodes=[int(a) for a in node_of])
    xr = d.values * r
    s = (xr.T @ xr) / counts
    logger.debug("masked covariance: min pairwise count %d", int(counts.min()))
    return CovEstimate(BlockSymMatrix(d.layout, (s + s.T) / 2.0),
                       _node_min_counts(counts, d.layout))


def covariance(d, center=False):
    """sample_covariance for complete data, masked_covariance otherwise"""
    if d.fully_observed:
        return sample_covariance(d, center=center)
    if center:
        logger.warning("centering is ignored for masked data")
    return masked_covariance(d)


def sample_mvn(precision, n, seed):
    """
    Draw n samples from N(0, precision^-1)

    All samples come from one PCG64 stream seeded with `seed`; there are no
    per-sample substreams. The stream is consumed row by row: sample i takes
    draws [i*d, (i+1)*d), so the first m rows of a size-n draw equal a
    size-m draw with the same seed.
    """
    if n < 0:
        raise InputError("sample count must be non-negative")
    try:
        chol = scipy.linalg.cholesky(precision.data, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("precision matrix is not positive definite")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal((n, precision.layout.total_dim))
    if n == 0:
        return Dataset(precision.layout, z)
    # L L^T = Omega  =>  x = L^{-T} z has covariance Omega^{-1}
    x = scipy.linalg.solve_triangular(chol, z.T, lower=True, trans="T").T
    return Dataset(precision.layout, x)
