"""Sample-size tables for both built-in scenarios, with the design d.f. at n_l."""

import argparse

from mmrm import scenarios
from mmrm.design import size_two_step


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", type=int, choices=(1, 2), nargs="*", default=[1, 2])
    ap.add_argument("--nl-offset", type=int, default=0, help="add this to n_l before the t refinement")
    args = ap.parse_args()
    for sc in args.scenario:
        print(f"scenario {sc} (qstar={scenarios.SCENARIO_QSTAR[sc]})")
        print(f"{'structure':<13}{'tau':>5}{'n_l':>6}{'f(n_l)':>8}{'n_u*':>8}{'n_u':>8}{'n':>6}{'power%':>9}")
        for s, tau in scenarios.table_rows(sc):
            plan = size_two_step(scenarios.design(s, tau, sc), nl_offset=args.nl_offset, bisection_below=None)
            print(f"{s:<13}{tau:>5.0f}{plan.nl:>6}{plan.df_nl:>8.2f}{plan.nu_star:>8.1f}{plan.nu:>8.1f}"
                  f"{plan.final:>6}{100 * plan.nominal_power:>9.2f}")
        print()


if __name__ == "__main__":
    main()
