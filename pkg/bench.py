"""
Simulation benchmark: recovery error against the rescaled sample size theta

For every (p, k, theta) the bench generates replicate ground truths, samples
n = theta s^2 k^2 log(pk) points, selects lambda by BIC and scores the
selected graph by Hamming distance to the truth.
"""
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

import config
from data_cov import Dataset, covariance, sample_mvn
from errors import InputError, NumericalError
from model_select import select_by_bic
from simgen import KINDS, MAX_DEGREE, REGIMES, generate, hamming_distance, theta_to_n

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ["schema_version", "kind", "regime", "p", "k", "theta", "n",
                 "extra_fraction", "mean_hamming", "sd_hamming", "exact_recovery_rate",
                 "mean_runtime", "replicates", "failures"]


@dataclass
class BenchSpec:
    kind: str = "chain"
    regime: str = "full"
    p_list: tuple = (20,)
    k_list: tuple = (3,)
    thetas: tuple = config.BENCH_THETAS
    replicates: int = config.BENCH_REPS
    grid_size: int = config.GRID_SIZE
    seed: int = config.SEED
    n_jobs: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown kind '{self.kind}'")
        if self.regime not in REGIMES:
            raise InputError(f"unknown regime '{self.regime}'")
        if self.replicates < 1:
            raise InputError("need at least one replicate")
        if list(self.thetas) != sorted(self.thetas):
            raise InputError("theta grid must be ascending")


@dataclass
class BenchRow:
    kind: str
    regime: str
    p: int
    k: int
    theta: float
    n: int
    mean_hamming: float
    sd_hamming: float
    exact_recovery_rate: float
    mean_runtime: float
    replicates: int
    failures: int = 0
    extra_fraction: float = 0.0
    schema_version: int = field(default=config.FORMAT_SCHEMA_VERSION)


def _data_seed(replicate_seed, theta):
    return np.random.SeedSequence([replicate_seed, int(round(theta * 1000))])


def _run_replicate(spec, p, k, theta, replicate, extra_fraction=0.0):
    """(hamming, runtime) for one replicate, or None when the fit failed"""
    seed = spec.seed + replicate
    truth = generate(spec.kind, p, k, seed, spec.regime)
    n = theta_to_n(theta, MAX_DEGREE[spec.kind], k, p)
    extra = int(math.ceil(extra_fraction * n))
    start = time.perf_counter()
    try:
        if n < 2:
            raise NumericalError(f"theta={theta} gives only {n} samples")
        sample = sample_mvn(truth.precision, n + extra, _data_seed(seed, theta))
        mask = None
        if extra:
            # extra rows keep only the first attribute of every node
            mask = np.ones_like(sample.values, dtype=bool)
            mask[n:, :] = False
            mask[n:, truth.layout.offsets[:-1]] = True
        data = Dataset(truth.layout, sample.values, mask)
        path = select_by_bic(covariance(data), spec.grid_size)
    except NumericalError as e:
        logger.warning("replicate %d (p=%d k=%d theta=%g) failed: %s",
                       replicate, p, k, theta, e)
        return None
    return hamming_distance(path.best.graph, truth.graph), time.perf_counter() - start


def _aggregate(spec, p, k, theta, results, extra_fraction=0.0):
    ok = [r for r in results if r is not None]
    hamming = np.array([h for h, _ in ok], dtype=float)
    runtime = np.array([t for _, t in ok], dtype=float)
    return BenchRow(
        kind=spec.kind,
        regime=spec.regime,
        p=p,
        k=k,
        theta=float(theta),
        n=theta_to_n(theta, MAX_DEGREE[spec.kind], k, p),
        mean_hamming=float(hamming.mean()) if ok else float("nan"),
        sd_hamming=float(hamming.std(ddof=1)) if len(ok) > 1 else 0.0,
        exact_recovery_rate=float(np.mean(hamming == 0)) if ok else 0.0,
        mean_runtime=float(runtime.mean()) if ok else float("nan"),
        replicates=len(results),
        failures=len(results) - len(ok),
        extra_fraction=float(extra_fraction),
    )


def _settings(spec, fractions):
    return [(p, k, theta, f) for p in spec.p_list for k in spec.k_list
            for theta in spec.thetas for f in fractions]


def _run(spec, fractions):
    settings = _settings(spec, fractions)
    jobs = [(setting, r) for setting in settings for r in range(spec.replicates)]
    results = Parallel(n_jobs=spec.n_jobs)(
        delayed(_run_replicate)(spec, p, k, theta, r, f) for (p, k, theta, f), r in jobs
    )
    rows = []
    for i, (p, k, theta, f) in enumerate(settings):
        chunk = results[i * spec.replicates:(i + 1) * spec.replicates]
        rows.append(_aggregate(spec, p, k, theta, chunk, f))
        logger.info("p=%d k=%d theta=%g extra=%g: mean hamming %.3f", p, k, theta, f,
                    rows[-1].mean_hamming)
    return rows


def run_bench(spec):
    return _run(spec, [0.0])


def run_partial_observation_bench(spec, extra_fractions):
    """Bench with ceil(f n) extra samples observing only each node's first attribute"""
    if min(spec.k_list) < 2:
        raise InputError("partial observation bench needs k >= 2")
    return _run(spec, list(extra_fractions))


def rows_to_frame(rows):
    return pd.DataFrame([asdict(r) for r in rows])[BENCH_COLUMNS]


def write_bench_csv(rows, path):
    rows_to_frame(rows).to_csv(path, index=False)


def gnuplot_script(csv_path, rows):
    """Plot mean Hamming distance against theta, one curve per (p, k, extra fraction)"""
    curves = sorted({(r.p, r.k, r.extra_fraction) for r in rows})
    # columns: 4=p 5=k 6=theta 8=extra_fraction 9=mean_hamming
    clauses = [
        f"'{csv_path}' every ::1 using 6:(($4=={p} && $5=={k} && abs($8-{f})<1e-9) ? $9 : 1/0) "
        f"with linespoints title 'p={p} k={k} extra={f:g}'"
        for p, k, f in curves
    ]
    return "\n".join([
        "set datafile separator ','",
        "set xlabel 'theta (rescaled sample size)'",
        "set ylabel 'mean Hamming distance'",
        "set key top right",
        "plot " + ", \\\n     ".join(clauses),
        "",
    ])
