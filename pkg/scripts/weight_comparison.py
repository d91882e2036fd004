"""Designed projection weights versus the reference (slow-mode) weight.

Fixes the clusters to the coherency partition and compares the relative
H2 error of the reference weight against the penalized weight design.
Emits weights.csv / weights_summary.json under --out.
"""
import argparse

from clusterlqr.harness import ExperimentConfig, run_weight_comparison


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--clusters", type=int, default=4, help="coherency cluster count")
    parser.add_argument("--q", type=float, default=100.0)
    parser.add_argument("--kappa", type=int, default=12)
    parser.add_argument("--rho", type=float, default=0.01, help="penalty factor (normalized)")
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--out", default="results/weight_comparison")
    args = parser.parse_args()

    config = ExperimentConfig(
        generator={
            "n": args.n,
            "r_spatial": args.clusters,
            "p_intra": 0.5,
            "ratio": 100.0,
            "b_d_columns": [round(0.73 * args.n)],
        },
        designs=["weight"],
        r_list=[args.clusters],
        kappa=args.kappa,
        q_spec={"scaled_identity": args.q},
        seeds=[int(s) for s in args.seeds.split(",")],
        timing_reps=1,
        kmeans={"restarts": 20},
        weight={"rho": args.rho},
        out_dir=args.out,
    )
    rows = run_weight_comparison(config)
    by_seed = {}
    for row in rows:
        by_seed.setdefault(row["seed"], {})[row["design"]] = row["rel_error"]
    for seed, pair in sorted(by_seed.items()):
        ref, des = pair["weight:reference"], pair["weight:designed"]
        print(f"seed={seed}: reference={ref:.4%}  designed={des:.4%}")
    print(f"\nwrote {args.out}/weights.csv")


if __name__ == "__main__":
    main()
