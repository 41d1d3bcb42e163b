"""Command-line interface: bench, train-pcnn, gen-data, analyze."""

import argparse
import json
import os
import sys

# The training kernels are fastest with single-threaded BLAS at these matrix
# sizes; parallelism belongs at the seed level (--workers).  Must be set
# before NumPy loads.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

from . import harness  # noqa: E402  (after the env guard)


def _parse_seeds(text):
    return tuple(int(s) for s in text.split(",") if s.strip())


def _parse_floats(text):
    return tuple(float(s) for s in text.split(",") if s.strip())


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--method", choices=harness.METHODS)
    parser.add_argument("--problem")
    parser.add_argument("--seeds", type=_parse_seeds, help="comma-separated, e.g. 0,1,2")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--data-dir", dest="data_dir")
    parser.add_argument("--max-iter", dest="max_iter", type=int)
    parser.add_argument("--eta", type=float)
    parser.add_argument("--epsilon", type=float)


def _build_config(args, **extra):
    base = harness.load_config(args.config) if args.config else None
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "method",
            "problem",
            "seeds",
            "out_dir",
            "workers",
            "data_dir",
            "max_iter",
            "eta",
            "epsilon",
        )
    }
    overrides.update(extra)
    return harness.config_with_overrides(base, **overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dualdimer",
        description="High-order saddle-point searches and physics-constrained "
        "network training experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="analytical benchmark saddle search")
    _add_common(p_bench)
    p_bench.add_argument(
        "--start", type=_parse_floats, help="explicit start point (comma-separated)"
    )

    p_train = sub.add_parser("train-pcnn", help="train the heat network")
    _add_common(p_train)
    p_train.add_argument("--fine-n", dest="fine_n", type=int)
    p_train.add_argument("--fine-dt", dest="fine_dt", type=float)

    p_gen = sub.add_parser("gen-data", help="generate training/reference datasets")
    _add_common(p_gen)
    p_gen.add_argument("--fine-n", dest="fine_n", type=int)
    p_gen.add_argument("--fine-dt", dest="fine_dt", type=float)

    p_an = sub.add_parser("analyze", help="stability / saddle verification")
    _add_common(p_an)
    p_an.add_argument("--point", type=_parse_floats, help="landscape point")
    p_an.add_argument("--checkpoint", help="trained network checkpoint (.npz)")
    p_an.add_argument("--full", action="store_true", help="full spectral analysis")

    args = parser.parse_args(argv)
    try:
        if args.command == "bench":
            config = _build_config(args, start=args.start)
            summary = harness.cmd_bench(config)
            print(json.dumps(summary["aggregate"], indent=2))
            return 0 if summary["all_converged"] else 2
        if args.command == "train-pcnn":
            config = _build_config(
                args, problem="heat_pcnn", fine_n=args.fine_n, fine_dt=args.fine_dt
            )
            summary = harness.cmd_train_pcnn(config)
            print(json.dumps(summary["aggregate"], indent=2))
            return 0 if summary["all_converged"] else 2
        if args.command == "gen-data":
            config = _build_config(args, fine_n=args.fine_n, fine_dt=args.fine_dt)
            print(json.dumps(harness.cmd_gen_data(config), indent=2))
            return 0
        if args.command == "analyze":
            config = _build_config(args)
            report = harness.cmd_analyze(
                config, point=args.point, checkpoint=args.checkpoint,
                eta=args.eta, full=args.full,
            )
            print(json.dumps(report, indent=2))
            return 0
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
