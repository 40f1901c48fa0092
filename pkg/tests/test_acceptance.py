"""Acceptance checks, one per criterion, each printing a PASS/FAIL line.

Run with pytest, or directly: python3 tests/test_acceptance.py
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import direct_restricted_loglik, random_monotone  # noqa: E402
from mmrm import scenarios  # noqa: E402
from mmrm.data import MonotoneDataset  # noqa: E402
from mmrm.design import size_two_step, varpi_tau  # noqa: E402
from mmrm.ldl import ar1_factors, cs_factors, factors_from_regressions, ldl_decompose  # noqa: E402
from mmrm.reml import ScaleMode, estimator_bias_reference, fit_mmrm, fit_visit, restricted_loglik  # noqa: E402
from mmrm.simulate import Distribution, generate_dataset, replication_rng, run_replications  # noqa: E402
from mmrm.variance import delta_variance, kr_variance, phi_p  # noqa: E402

# reference rows: structure, tau, n_l, n_u*, n_u, n, nominal power %
SIZES_SCENARIO_1 = [
    ("unstructured", -12, 17, 19.4, 20.4, 21, 91.86),
    ("unstructured", -8, 36, 38.1, 38.6, 39, 90.49),
    ("unstructured", -4, 139, 140.8, 141.0, 142, 90.22),
    ("cs", -12, 19, 21.1, 22.7, 23, 91.36),
    ("cs", -8, 40, 41.8, 42.7, 43, 90.36),
    ("cs", -4, 153, 154.8, 155.5, 156, 90.11),
    ("ar1", -12, 17, 19.6, 20.7, 21, 91.53),
    ("ar1", -8, 36, 38.4, 39.0, 39, 90.24),
    ("ar1", -4, 140, 141.8, 142.1, 143, 90.21),
    ("toeplitz", -12, 15, 17.6, 18.7, 19, 91.81),
    ("toeplitz", -8, 32, 33.9, 34.3, 35, 90.81),
    ("toeplitz", -4, 122, 123.7, 123.9, 124, 90.04),
]
SIZES_SCENARIO_2 = [
    ("unstructured", -12, 20, 21.9, 23.5, 24, 91.51),
    ("unstructured", -8, 39, 40.7, 41.2, 42, 90.70),
    ("unstructured", -4, 142, 143.4, 143.4, 144, 90.13),
    ("cs", -12, 21, 23.8, 27.1, 28, 92.30),
    ("cs", -8, 42, 44.5, 45.9, 46, 90.27),
    ("cs", -4, 155, 157.5, 158.2, 159, 90.17),
    ("ar1", -12, 20, 22.0, 23.9, 24, 91.09),
    ("ar1", -8, 39, 41.0, 41.7, 42, 90.42),
    ("ar1", -4, 143, 144.4, 144.5, 145, 90.12),
    ("toeplitz", -12, 18, 20.0, 21.9, 22, 91.31),
    ("toeplitz", -8, 35, 36.4, 36.9, 37, 90.24),
    ("toeplitz", -4, 125, 126.4, 126.3, 127, 90.17),
]

SEED = 20240607


def _table(rows, scenario):
    t0 = time.perf_counter()
    plans = [size_two_step(scenarios.design(s, tau, scenario), bisection_below=None) for s, tau, *_ in rows]
    elapsed = time.perf_counter() - t0
    bad = []
    for (s, tau, nl, nus, nu, n, pw), plan in zip(rows, plans):
        if not (
            plan.nl == nl
            and abs(plan.nu_star - nus) <= 0.05
            and abs(plan.nu - nu) <= 0.05
            and plan.final == n
            and abs(100 * plan.nominal_power - pw) <= 0.02
        ):
            bad.append(f"{s},{tau}: nl={plan.nl} nu*={plan.nu_star:.3f} nu={plan.nu:.3f} "
                       f"n={plan.final} power={100 * plan.nominal_power:.3f}")
    ok = not bad and elapsed < 1.0
    return ok, f"{len(rows) - len(bad)}/{len(rows)} rows match, {elapsed:.3f} s" + ("; " + "; ".join(bad) if bad else "")


def criterion_1():
    """Sample-size table, baseline-only scenario."""
    return _table(SIZES_SCENARIO_1, 1)


def criterion_2():
    """Sample-size table, stratified scenario (qstar=3)."""
    return _table(SIZES_SCENARIO_2, 2)


def _simulated(structure, tau, n, dist=Distribution(), reps=2000, seed=SEED):
    gen = scenarios.generator(structure, tau, distribution=dist)
    return run_replications(gen, n, reps, seed)


def criterion_3():
    """Simulated power of four baseline-scenario cells within 2 points of nominal."""
    t0 = time.perf_counter()
    cells = [SIZES_SCENARIO_1[0], SIZES_SCENARIO_1[4], SIZES_SCENARIO_1[6], SIZES_SCENARIO_1[10]]
    parts, ok = [], True
    for s, tau, _, _, _, n, nominal in cells:
        sim = 100 * _simulated(s, tau, n).simulated_power
        ok &= abs(sim - nominal) <= 2.0
        parts.append(f"{s},{tau},n={n}: {sim:.2f} vs {nominal:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    return ok, "; ".join(parts) + f"; {elapsed:.0f} s"


def criterion_4():
    """Type-I error and power under skew-normal and multivariate t."""
    t0 = time.perf_counter()
    s, tau, _, _, _, n, nominal = SIZES_SCENARIO_1[0]
    parts, ok = [], True
    for label, dist in (("skew k=0.8", Distribution("skew", kappa=0.8)), ("t d=10", Distribution("t", df=10))):
        size = 100 * _simulated(s, 0.0, n, dist).simulated_power
        power = 100 * _simulated(s, tau, n, dist, seed=SEED + 1).simulated_power
        ok &= 3.5 <= size <= 6.5 and abs(power - nominal) <= 2.5
        parts.append(f"{label}: type-I {size:.2f}%, power {power:.2f}% (nominal {nominal:.2f})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    return ok, "; ".join(parts) + f"; {elapsed:.0f} s"


def _flat(f):
    return np.concatenate([np.concatenate(f.betas[1:]), f.innovations])


def _unflat(x, p):
    betas, k = [np.zeros(0)], 0
    for j in range(1, p):
        betas.append(x[k:k + j])
        k += j
    return factors_from_regressions(betas, x[k:])


def _perturbed(f, rng, scale):
    betas = [b + scale * rng.standard_normal(b.shape) for b in f.betas]
    return factors_from_regressions(betas, f.innovations * np.exp(scale * rng.standard_normal(f.p)))


def criterion_5():
    """Closed-form REML maximizes the restricted likelihood; decomposition matches direct form."""
    rng = np.random.default_rng(SEED)
    worst_grad, beaten, worst_spread = 0.0, 0, 0.0
    for _ in range(50):
        d = random_monotone(rng, n=40, p=4)
        fit = fit_mmrm(d, ScaleMode.REML)
        best = restricted_loglik(d, fit.factors)
        for k in range(200):
            scale = (0.2, 0.05, 0.01, 0.002)[k % 4]
            beaten += restricted_loglik(d, _perturbed(fit.factors, rng, scale)) >= best
        x0 = _flat(fit.factors)
        for k in range(x0.size):
            h = 1e-5 * max(1.0, abs(x0[k]))
            e = np.zeros_like(x0)
            e[k] = h
            g = (restricted_loglik(d, _unflat(x0 + e, 4)) - restricted_loglik(d, _unflat(x0 - e, 4))) / (2 * h)
            worst_grad = max(worst_grad, abs(g))
    d = random_monotone(rng, n=40, p=4)
    fit = fit_mmrm(d)
    diffs = []
    for _ in range(20):
        f = _perturbed(fit.factors, rng, 0.3)
        diffs.append(direct_restricted_loglik(d, f.compose())[0] - restricted_loglik(d, f))
    worst_spread = float(np.ptp(diffs))
    ok = beaten == 0 and worst_grad < 1e-5 and worst_spread < 1e-8
    return ok, (f"perturbations beating the estimate: {beaten}/10000; max |grad| {worst_grad:.2e}; "
                f"decomposition spread {worst_spread:.2e}")


def _variance_draws(reps, n=40, seed=SEED, structure="unstructured"):
    gen = scenarios.generator(structure, -8.0)
    est, asy, kr, de = (np.empty(reps) for _ in range(4))
    for r in range(reps):
        fit = fit_mmrm(generate_dataset(gen, n, replication_rng(seed, r)))
        k = fit.q - 1
        est[r] = fit.tau_hat[-1]
        asy[r] = phi_p(fit)[k, k]
        kr[r] = kr_variance(fit)[k, k]
        de[r] = delta_variance(fit)[k, k]
    return gen, est, asy, kr, de


def criterion_6():
    """Monte Carlo calibration of the design and KR variances at n=40."""
    gen, est, _, kr, de = _variance_draws(10_000)
    emp = est.var(ddof=1)
    design = varpi_tau(40, gen.design()) / 40
    r1, r2 = abs(emp / design - 1), abs(kr.mean() / emp - 1)
    ok = r1 <= 0.05 and r2 <= 0.05 and de.mean() >= kr.mean()
    return ok, (f"empirical var {emp:.4f}, design {design:.4f} ({100 * r1:.1f}%), mean KR {kr.mean():.4f} "
                f"({100 * r2:.1f}%), mean delta {de.mean():.4f}")


def criterion_7():
    """ML and REML innovation-variance biases at n=30, p=3."""
    rng = np.random.default_rng(SEED)
    S = scenarios.SIGMA_UN[:3, :3]
    true = ldl_decompose(S).innovations
    C = np.linalg.cholesky(S)
    n, reps = 30, 20_000
    pattern = np.repeat([3, 2, 1], [22, 4, 4])
    observed = np.arange(3) < pattern[:, None]
    group = np.arange(n) % 2
    ml, reml = np.empty((reps, 3)), np.empty((reps, 3))
    for k in range(reps):
        x = rng.normal(17.9, 5.5, n)
        y = rng.standard_normal((n, 3)) @ C.T + 0.7 * x[:, None] - 4.0 * group[:, None]
        d = MonotoneDataset.from_arrays(y, observed, group, x)
        for j in range(1, 4):
            v = fit_visit(d, j)
            ml[k, j - 1], reml[k, j - 1] = v.sigma2_ml, v.sigma2_reml
    worst, parts = 0.0, []
    for j in range(3):
        nj = int(observed[:, j].sum())
        b_ml, b_reml = estimator_bias_reference(true[j], j + 1, nj, 3)
        for name, arr, b in (("ml", ml, b_ml), ("reml", reml, b_reml)):
            z = (arr[:, j].mean() - true[j] - b) / (arr[:, j].std(ddof=1) / np.sqrt(reps))
            worst = max(worst, abs(z))
            parts.append(f"{name}{j + 1} {arr[:, j].mean() - true[j]:+.3f}/{b:+.3f}")
    return worst <= 3.0, f"max |z| {worst:.2f}; " + ", ".join(parts)


def criterion_8():
    """Closed-form CS and AR(1) factors against numeric LDL."""
    worst = 0.0
    k = None
    for p in range(1, 11):
        idx = np.arange(p)
        for h in (0.1, 1.0, 45.0, 1000.0):
            for rho in (-0.09, 0.0, 0.1, 1 / 3, 0.5, 0.8, 0.95):
                cs = h * ((1 - rho) * np.eye(p) + rho)
                ar = h * rho ** np.abs(np.subtract.outer(idx, idx))
                for closed, dense in ((cs_factors(h, rho, p), cs), (ar1_factors(h, rho, p), ar)):
                    num = ldl_decompose(dense)
                    err = max(np.max(np.abs(closed.L - num.L)),
                              np.max(np.abs(closed.innovations - num.innovations)))
                    if err > worst:
                        worst, k = err, (p, h, rho)
    return worst <= 1e-12, f"max entrywise error {worst:.1e} at p,h,rho={k}"


def criterion_9():
    """asymptotic <= KR <= delta SE ordering on simulated monotone data."""
    _, _, asy, kr, de = _variance_draws(1000, seed=SEED + 9)
    frac = float(np.mean((asy <= kr) & (kr <= de)))
    return frac >= 0.95, f"ordering holds in {100 * frac:.1f}% of 1000 replications"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


def _report(i, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {i}: {detail}"


@pytest.mark.parametrize("i", range(1, len(CRITERIA) + 1))
def test_criterion(i, capsys):
    ok, detail = CRITERIA[i - 1]()
    with capsys.disabled():
        print("\n" + _report(i, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for i, fn in enumerate(CRITERIA, start=1):
        ok, detail = fn()
        failed += not ok
        print(_report(i, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
