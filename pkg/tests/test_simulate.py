import math

import numpy as np
import pytest

from mmrm import scenarios
from mmrm.errors import InvalidSpecError, NotPositiveDefiniteError, ReplicationFailureError
from mmrm.simulate import (
    Distribution, GenerationSpec, ReplicationRecord, _noise, draw_patterns, generate_dataset,
    replication_rng, run_replications, summarize, write_records_tsv,
)


def noise(dist, structure="unstructured", n=200_000, seed=3):
    gen = scenarios.generator(structure, -8, distribution=dist)
    return gen, _noise(gen, n, np.random.default_rng(seed))


@pytest.mark.parametrize("dist", [Distribution(), Distribution("t", df=10), Distribution("skew", kappa=0.8)])
def test_noise_moments(dist):
    gen, e = noise(dist)
    se = np.sqrt(np.diag(gen.sigma) / e.shape[0])
    assert np.all(np.abs(e.mean(axis=0)) < 4 * se)
    assert np.allclose(np.cov(e.T), gen.sigma, rtol=0.03, atol=0.5)


def test_skew_normal_marginal_skewness():
    kappa = 0.8
    _, e = noise(Distribution("skew", kappa=kappa))
    a = 1 - 2 * kappa**2 / math.pi
    m3 = math.sqrt(2 / math.pi) * (4 / math.pi - 1)  # third central moment of |N(0,1)|
    want = kappa**3 * m3 / a**1.5
    z = (e - e.mean(axis=0)) / e.std(axis=0)
    assert np.allclose((z**3).mean(axis=0), want, atol=0.03)


def test_skew_zero_equals_normal():
    _, a = noise(Distribution("skew", kappa=0.0), n=500)
    _, b = noise(Distribution(), n=500)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10)


def test_skew_cs_infeasible():
    gen = scenarios.generator("cs", -12, distribution=Distribution("skew", kappa=0.9))
    with pytest.raises(NotPositiveDefiniteError):
        generate_dataset(gen, 20, np.random.default_rng(0))
    for s in ("unstructured", "ar1", "toeplitz"):
        gen = scenarios.generator(s, -12, distribution=Distribution("skew", kappa=0.9))
        generate_dataset(gen, 20, np.random.default_rng(0))


def test_t_large_df_is_near_normal():
    gen, e = noise(Distribution("t", df=1e6), n=100_000)
    assert np.allclose(np.cov(e.T), gen.sigma, rtol=0.03, atol=0.5)


def test_pattern_frequencies():
    ret = scenarios.RETENTION[0]
    r = draw_patterns(ret, 200_000, np.random.default_rng(1))
    probs = -np.diff(np.concatenate([[1.0], ret, [0.0]]))
    freq = np.bincount(r, minlength=5) / r.size
    assert np.allclose(freq, probs, atol=4 * np.sqrt(0.25 / r.size))


def test_generated_dataset_shape():
    gen = scenarios.generator("ar1", -8, scenario=2)
    d = generate_dataset(gen, 41, np.random.default_rng(2))
    assert d.n == 41 and d.qstar == 3 and d.q == 5
    assert sorted(d.group.tolist()).count(1) == 21
    assert set(np.unique(d.covariates[:, 1:])) <= {0.0, 1.0}


def test_mean_model():
    gen = scenarios.generator("unstructured", -8).replace(retention=np.ones((2, 4)))
    d = generate_dataset(gen, 20_000, np.random.default_rng(4))
    B = np.linalg.lstsq(d.design, d.y, rcond=None)[0]
    assert np.allclose(B[0], gen.intercept, atol=0.3)
    assert np.allclose(B[1], gen.baseline_coef, atol=0.02)
    assert np.allclose(B[2], gen.treatment, atol=0.3)


def test_replications_deterministic_across_workers():
    gen = scenarios.generator("unstructured", -12)
    a = run_replications(gen, 21, 24, seed=9, workers=1, keep_records=True)
    b = run_replications(gen, 21, 24, seed=9, workers=3, keep_records=True)
    assert a.records == b.records
    assert a.to_dict() == b.to_dict()
    c = run_replications(gen, 21, 24, seed=10)
    assert c.estimate_mean != a.estimate_mean


def test_summary_counts():
    gen = scenarios.generator("unstructured", -12)
    s = run_replications(gen, 21, 40, seed=1)
    assert 0 <= s.simulated_power <= 1
    m = s.reps - s.failures
    assert s.simulated_power == s.rejections / m
    assert s.mc_se == pytest.approx(math.sqrt(s.simulated_power * (1 - s.simulated_power) / m))
    assert replication_rng(1, 3).random() == replication_rng(1, 3).random()


def test_failures_are_counted_and_capped():
    ok = ReplicationRecord(rep=0, ok=True, estimate=1.0, df=10.0, p_value=0.01, reject=True)
    bad = ReplicationRecord(rep=1, ok=False)
    s = summarize([ok] * 99 + [bad], seed=0, n=10)
    assert s.failures == 1 and s.simulated_power == 1.0
    with pytest.raises(ReplicationFailureError):
        summarize([ok] * 9 + [bad], seed=0, n=10)


def test_tiny_trials_fail_loudly():
    gen = scenarios.generator("unstructured", -12)
    with pytest.raises(ReplicationFailureError):
        run_replications(gen, 8, 20, seed=0)


def test_records_tsv(tmp_path):
    gen = scenarios.generator("cs", -8)
    s = run_replications(gen, 43, 5, seed=2, keep_records=True)
    path = tmp_path / "r.tsv"
    write_records_tsv(path, s.records)
    lines = path.read_text().splitlines()
    assert lines[0].split("\t")[0] == "rep" and len(lines) == 6
    assert float(lines[1].split("\t")[2]) == s.records[0].estimate


def test_generation_spec_validation_and_json():
    gen = scenarios.generator("toeplitz", -4, scenario=2, distribution=Distribution("t", df=10))
    back = GenerationSpec.from_dict(gen.to_dict())
    r1 = generate_dataset(gen, 30, np.random.default_rng(5))
    r2 = generate_dataset(back, 30, np.random.default_rng(5))
    assert np.array_equal(np.nan_to_num(r1.y), np.nan_to_num(r2.y))
    with pytest.raises(InvalidSpecError):
        Distribution("t", df=2)
    with pytest.raises(InvalidSpecError):
        Distribution("skew", kappa=1.0)
    with pytest.raises(InvalidSpecError):
        gen.replace(treatment=(1.0, 2.0))
    with pytest.raises(InvalidSpecError):
        GenerationSpec.from_dict({"intercept": [1]})
    d = gen.design()
    assert d.tau == -4 and d.qstar == 3
