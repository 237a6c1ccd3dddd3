import numpy as np
import pytest
from numpy.testing import assert_allclose

from blockmat import AttributeLayout, BlockSymMatrix
from data_cov import (Dataset, covariance, masked_covariance, sample_covariance,
                      sample_mvn)
from errors import InputError, NumericalError

PAIR = AttributeLayout((1, 1))


def test_single_sample_outer_product():
    cov = sample_covariance(Dataset(PAIR, [[1.0, 2.0]]))
    assert_allclose(cov.s.data, [[1.0, 2.0], [2.0, 4.0]])
    assert cov.n_eff.tolist() == [[1, 1], [1, 1]]


def test_uncentered_and_centered():
    cov = sample_covariance(Dataset(PAIR, [[1.0, 0.0], [-1.0, 0.0]]))
    assert_allclose(cov.s.data, [[1.0, 0.0], [0.0, 0.0]])
    cov = sample_covariance(Dataset(PAIR, [[1.0, 1.0], [3.0, 1.0]]), center=True)
    assert_allclose(cov.s.data, [[1.0, 0.0], [0.0, 0.0]])


def test_zero_samples_rejected():
    with pytest.raises(InputError):
        sample_covariance(Dataset(PAIR, np.zeros((0, 2))))


def test_masked_hand_example():
    d = Dataset(PAIR, [[1.0, 2.0], [3.0, 4.0]], mask=[[1, 1], [1, 0]])
    cov = masked_covariance(d)
    assert_allclose(cov.s.data, [[5.0, 2.0], [2.0, 4.0]])
    assert cov.n_eff.tolist() == [[2, 1], [1, 1]]


def test_full_mask_matches_sample_covariance(rng):
    layout = AttributeLayout((2, 3))
    x = rng.standard_normal((40, 5))
    full = sample_covariance(Dataset(layout, x)).s.data
    masked = masked_covariance(Dataset(layout, x, np.ones_like(x))).s.data
    assert_allclose(masked, full, atol=1e-12, rtol=0)


def test_never_coobserved_pair_names_columns():
    d = Dataset(PAIR, [[1.0, 0.0], [0.0, 2.0]], mask=[[1, 0], [0, 1]])
    with pytest.raises(InputError) as info:
        masked_covariance(d)
    assert info.value.details["columns"] == [0, 1]
    assert info.value.details["nodes"] == [0, 1]


def test_covariance_dispatches_on_mask():
    d = Dataset(PAIR, [[1.0, 2.0], [3.0, 4.0]], mask=[[1, 1], [1, 0]])
    assert_allclose(covariance(d).s.data, masked_covariance(d).s.data)


def test_dataset_shape_checks():
    with pytest.raises(InputError):
        Dataset(PAIR, np.zeros((3, 3)))
    with pytest.raises(InputError):
        Dataset(PAIR, np.zeros((3, 2)), mask=np.ones((2, 2)))
    with pytest.raises(InputError):
        Dataset(PAIR, [[np.nan, 1.0]])


def test_sample_mvn_law_of_large_numbers():
    layout = AttributeLayout.uniform(2, 2)
    d = sample_mvn(BlockSymMatrix.identity(layout), 100_000, seed=3)
    assert np.max(np.abs(sample_covariance(d).s.data - np.eye(4))) < 0.05


def test_sample_mvn_matches_covariance():
    layout = AttributeLayout.uniform(2, 2)
    omega = np.eye(4) + 0.3 * (np.ones((4, 4)) - np.eye(4))
    d = sample_mvn(BlockSymMatrix(layout, omega), 100_000, seed=11)
    assert np.max(np.abs(sample_covariance(d).s.data - np.linalg.inv(omega))) < 0.05


def test_sample_mvn_is_deterministic_and_prefix_stable():
    layout = AttributeLayout.uniform(3, 1)
    omega = BlockSymMatrix.identity(layout)
    a = sample_mvn(omega, 50, seed=7)
    b = sample_mvn(omega, 50, seed=7)
    short = sample_mvn(omega, 20, seed=7)
    assert np.array_equal(a.values, b.values)
    assert_allclose(a.values[:20], short.values, rtol=1e-12, atol=0)
    assert sample_mvn(omega, 0, seed=7).n == 0


def test_sample_mvn_reads_one_stream_row_by_row():
    layout = AttributeLayout.uniform(2, 2)
    d = sample_mvn(BlockSymMatrix.identity(layout), 6, seed=21)
    stream = np.random.Generator(np.random.PCG64(21)).standard_normal(24)
    assert_allclose(d.values, stream.reshape(6, 4), rtol=1e-12, atol=1e-15)


def test_sample_mvn_rejects_indefinite():
    layout = AttributeLayout((1, 1))
    with pytest.raises(NumericalError):
        sample_mvn(BlockSymMatrix(layout, [[1.0, 2.0], [2.0, 1.0]]), 10, seed=0)


def test_dataset_csv_with_mask(tmp_path):
    d = Dataset(PAIR, [[1.0, 2.0], [3.0, 4.0]], mask=[[1, 1], [1, 0]])
    d.to_csv(tmp_path / "x.csv", tmp_path / "m.csv")
    back = Dataset.from_csv(tmp_path / "x.csv", PAIR, tmp_path / "m.csv")
    assert_allclose(masked_covariance(back).s.data, [[5.0, 2.0], [2.0, 4.0]])
