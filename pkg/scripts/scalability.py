"""Wall-clock comparison of the full-order solve against the reduced pipeline.

For each network size, times the dense Hamiltonian solve of the full LQR
and the reduced pipeline (rank-kappa Gramian surrogate, clustering,
reduced Riccati solve), reporting medians over repetitions.
"""
import argparse

from clusterlqr.harness import ExperimentConfig, run_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="200,400,800")
    parser.add_argument("--r", type=int, default=5)
    parser.add_argument("--kappa", type=int, default=5)
    parser.add_argument("--q", type=float, default=100.0)
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--out", default="results/scalability")
    args = parser.parse_args()

    print(f"{'n':>6s} {'full':>12s} {'reduced':>12s} {'ratio':>8s} {'rel error':>10s}")
    for n in (int(s) for s in args.sizes.split(",")):
        config = ExperimentConfig(
            generator={
                "n": n,
                "r_spatial": args.r,
                "p_intra": 0.5,
                "ratio": 100.0,
                "b_d_columns": [n // 2],
            },
            designs=["cluster"],
            r_list=[args.r],
            kappa=args.kappa,
            q_spec={"scaled_identity": args.q},
            seeds=[0],
            timing_reps=args.reps,
            kmeans={"restarts": 8},
            out_dir=f"{args.out}/n{n}",
        )
        row = run_sweep(config)[0]
        err = f"{row['rel_error']:.3%}" if row["rel_error"] is not None else "unstable"
        print(
            f"{n:>6d} {row['t_full_ms']:>10.1f}ms {row['t_reduced_ms']:>10.1f}ms "
            f"{row['t_reduced_ms'] / row['t_full_ms']:>8.3f} {err:>10s}"
        )


if __name__ == "__main__":
    main()
