import math

import pandas as pd
import pytest
from scipy.stats import spearmanr

from bench import (BENCH_COLUMNS, BenchSpec, gnuplot_script, rows_to_frame, run_bench,
                   run_partial_observation_bench, write_bench_csv)
from errors import InputError


def small_spec(**overrides):
    settings = dict(kind="chain", p_list=(20,), k_list=(1,), thetas=(2.0,), replicates=2,
                    grid_size=5, seed=0)
    settings.update(overrides)
    return BenchSpec(**settings)


def test_small_run_is_deterministic():
    first = run_bench(small_spec())
    second = run_bench(small_spec())
    assert len(first) == 1
    assert first[0].n == 24
    assert first[0].mean_hamming == second[0].mean_hamming
    assert first[0].mean_hamming >= 0
    assert 0.0 <= first[0].exact_recovery_rate <= 1.0
    assert first[0].failures == 0


def test_parallel_matches_serial():
    serial = run_bench(small_spec(kind="nn"))
    parallel = run_bench(small_spec(kind="nn", n_jobs=2))
    assert serial[0].mean_hamming == parallel[0].mean_hamming


def test_spec_validation():
    with pytest.raises(InputError):
        small_spec(kind="star")
    with pytest.raises(InputError):
        small_spec(regime="banded")
    with pytest.raises(InputError):
        small_spec(replicates=0)
    with pytest.raises(InputError):
        small_spec(thetas=(4.0, 2.0))


def test_too_few_samples_counts_as_failure():
    row = run_bench(small_spec(thetas=(0.01,)))[0]
    assert row.n == 1
    assert row.failures == 2
    assert math.isnan(row.mean_hamming)
    assert row.exact_recovery_rate == 0.0


def test_one_row_per_setting(tmp_path):
    rows = run_bench(small_spec(thetas=(1.0, 2.0), replicates=1))
    assert [r.theta for r in rows] == [1.0, 2.0]
    path = tmp_path / "bench.csv"
    write_bench_csv(rows, path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == BENCH_COLUMNS
    assert len(frame) == 2
    assert rows_to_frame(rows)["schema_version"].tolist() == [1, 1]


def test_gnuplot_script_references_csv():
    rows = run_bench(small_spec(replicates=1))
    script = gnuplot_script("out/bench.csv", rows)
    assert "set datafile separator ','" in script
    assert "'out/bench.csv' every ::1 using 6:" in script
    assert "title 'p=20 k=1 extra=0'" in script


def test_partial_bench_without_extra_matches_plain():
    spec = small_spec(k_list=(2,), replicates=1)
    plain = run_bench(spec)
    partial = run_partial_observation_bench(spec, [0.0])
    assert partial[0].mean_hamming == plain[0].mean_hamming


def test_partial_bench_rows_per_fraction():
    rows = run_partial_observation_bench(small_spec(k_list=(2,), replicates=1),
                                         [0.1, 0.3, 0.5])
    assert [r.extra_fraction for r in rows] == [0.1, 0.3, 0.5]


def test_partial_bench_needs_two_attributes():
    with pytest.raises(InputError):
        run_partial_observation_bench(small_spec(k_list=(1,)), [0.5])


# ============================================
# RECOVERY CURVES
# ============================================

@pytest.mark.slow
def test_exact_recovery_at_large_theta():
    spec = BenchSpec(kind="chain", regime="full", p_list=(20,), k_list=(3,), thetas=(13.0,),
                     replicates=20, seed=42)
    row = run_bench(spec)[0]
    assert row.n == 1917
    assert row.exact_recovery_rate >= 0.9


@pytest.mark.slow
def test_hamming_falls_with_theta():
    spec = BenchSpec(kind="chain", regime="full", p_list=(20,), k_list=(3,),
                     thetas=(1.0, 2.0, 4.0, 8.0, 13.0), replicates=20, seed=42)
    rows = run_bench(spec)
    rho, _ = spearmanr([r.theta for r in rows], [r.mean_hamming for r in rows])
    assert rho <= 0


@pytest.mark.slow
def test_extra_first_attribute_samples_help():
    spec = BenchSpec(kind="chain", regime="full", p_list=(20,), k_list=(3,), thetas=(4.0,),
                     replicates=20, seed=42)
    baseline, extra = run_partial_observation_bench(spec, [0.0, 0.5])
    assert extra.mean_hamming <= baseline.mean_hamming
