"""Compare asymptotic, KR and delta variances of tau_hat_p with the Monte Carlo variance."""

import argparse

import numpy as np

from mmrm import scenarios
from mmrm.design import varpi_tau
from mmrm.reml import fit_mmrm
from mmrm.simulate import generate_dataset, replication_rng
from mmrm.variance import InfoMode, delta_variance, kr_variance, phi_p


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="*", default=[30, 40, 80])
    ap.add_argument("--reps", type=int, default=5000)
    ap.add_argument("--structure", default="unstructured", choices=scenarios.STRUCTURES)
    ap.add_argument("--info-mode", default="expected", choices=("expected", "observed"))
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    gen = scenarios.generator(args.structure, -8.0)
    spec = gen.design()
    print(f"{'n':>5}{'MC var':>10}{'design':>10}{'asym':>10}{'KR':>10}{'delta':>10}{'order%':>8}")
    for n in args.n:
        est, v = np.empty(args.reps), np.empty((args.reps, 3))
        for r in range(args.reps):
            fit = fit_mmrm(generate_dataset(gen, n, replication_rng(args.seed, r)))
            k = fit.q - 1
            est[r] = fit.tau_hat[-1]
            v[r] = phi_p(fit)[k, k], kr_variance(fit, InfoMode(args.info_mode))[k, k], delta_variance(fit)[k, k]
        order = np.mean((v[:, 0] <= v[:, 1]) & (v[:, 1] <= v[:, 2]))
        m = v.mean(axis=0)
        print(f"{n:>5}{est.var(ddof=1):>10.4f}{varpi_tau(n, spec) / n:>10.4f}"
              f"{m[0]:>10.4f}{m[1]:>10.4f}{m[2]:>10.4f}{100 * order:>8.1f}")


if __name__ == "__main__":
    main()
