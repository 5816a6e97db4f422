"""Command-line harness.

Subcommands:

* ``test``      - two-sample permutation MMD test between two sample sources
* ``sweep-rbm`` - bitwidth x sigmoid sweep of a quantized RBM against truth data
* ``train-rbm`` - contrastive-divergence training and model persistence
* ``cdf``       - empirical CDF exports from a stored result series

Exit codes: 0 = pass (p >= alpha), 2 = usage or data error, 3 = statistical
rejection at alpha. Every command is deterministic given its ``--seed``.

A plain-text ``key=value`` config file can pre-set any long flag of the
chosen subcommand; explicit flags override file values.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import reports
from .distances import DistanceKind
from .errors import CapacityError, DimensionError
from .mmd import Estimator, KernelConfig
from .permtest import (
    PermutationTestResult,
    TestConfig,
    TestMode,
    derive_seed,
    ecdf,
    monte_carlo_pvalues,
    permutation_test,
    subset_provider,
    summarize_pvalues,
)
from .rbm import (
    InferenceConfig,
    SigmoidKind,
    gibbs_generate,
    load_model,
    save_model,
    sweep_fraction_split,
    train_cd1,
)
from .samples import ImageShape, SampleSet, binarize, load_samples

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_REJECT = 3

DEFAULT_BITWIDTHS = (4, 8, 12, 16, 24, 32, 48, 64)
DEFAULT_SIGMOIDS = (
    SigmoidKind.TRUE,
    SigmoidKind.PLAN,
    SigmoidKind.RAMP,
    SigmoidKind.AS,
)


def _parse_shape(text: str) -> ImageShape:
    parts = text.lower().split("x")
    if len(parts) == 2:
        parts.append("1")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"shape must look like HxW or HxWxC, got {text!r}"
        )
    try:
        h, w, c = (int(p) for p in parts)
        return ImageShape(h, w, c)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parse_bitwidths(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad bitwidth list {text!r}") from exc
    if not values or any(v < 2 for v in values):
        raise argparse.ArgumentTypeError(f"bitwidths must all be >= 2, got {text!r}")
    return values


def _parse_sigmoids(text: str) -> tuple[SigmoidKind, ...]:
    try:
        values = tuple(SigmoidKind(tok.strip().lower()) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad sigmoid list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("sigmoid list is empty")
    return values


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file pre-setting any long flag")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--out", default="ptmmd-out", help="output directory")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent repeats")


def _add_kernel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--distance",
        choices=[d.value for d in DistanceKind],
        default=DistanceKind.EUCLIDEAN.value,
    )
    parser.add_argument(
        "--estimator",
        choices=[e.value for e in Estimator],
        default=Estimator.BIASED.value,
    )
    parser.add_argument(
        "--mode",
        choices=[m.value for m in TestMode],
        default=TestMode.PAPER_STRICT.value,
    )
    parser.add_argument("--permutations", type=int, default=250)
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument(
        "--sigma",
        type=float,
        default=None,
        help="kernel bandwidth; omit for the median heuristic",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptmmd",
        description="Permutation-tested MMD comparison of sample sets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="two-sample permutation MMD test")
    p_test.add_argument("dir_x", help="first sample source (dir, IDX, or raw tensor)")
    p_test.add_argument("dir_y", help="second sample source")
    p_test.add_argument("--shape", type=_parse_shape, default=None, help="HxWxC")
    _add_kernel_flags(p_test)
    p_test.add_argument(
        "--repeats", type=int, default=1, help="independent subset tests to run"
    )
    p_test.add_argument(
        "--set-size", type=int, default=None, help="per-side subset size when repeating"
    )
    p_test.add_argument(
        "--subset-mode",
        choices=["disjoint", "resample"],
        default="disjoint",
        help="how repeated subsets are drawn from each source",
    )
    _add_common(p_test)

    p_sweep = sub.add_parser("sweep-rbm", help="bitwidth x sigmoid RBM sweep")
    p_sweep.add_argument("--data", required=True, help="ground-truth samples")
    p_sweep.add_argument("--shape", type=_parse_shape, default=None)
    p_sweep.add_argument("--model", default=None, help="PTMMDRBM model file")
    p_sweep.add_argument("--hidden", type=int, default=128)
    p_sweep.add_argument("--epochs", type=int, default=30)
    p_sweep.add_argument("--lr", type=float, default=0.05)
    p_sweep.add_argument("--batch", type=int, default=64)
    p_sweep.add_argument("--train-subset", type=int, default=5000)
    p_sweep.add_argument("--binarize", type=float, default=0.5)
    p_sweep.add_argument(
        "--bitwidths", type=_parse_bitwidths, default=DEFAULT_BITWIDTHS
    )
    p_sweep.add_argument("--sigmoids", type=_parse_sigmoids, default=DEFAULT_SIGMOIDS)
    p_sweep.add_argument("--repeats", type=int, default=100)
    p_sweep.add_argument("--set-size", type=int, default=1000)
    p_sweep.add_argument("--gibbs-steps", type=int, default=200)
    p_sweep.add_argument("--probe-size", type=int, default=100)
    p_sweep.add_argument(
        "--sweep-distance",
        choices=["euclidean", "haar", "both"],
        default="both",
        help="distance kinds to sweep",
    )
    p_sweep.add_argument(
        "--truth-mode",
        choices=["disjoint", "resample"],
        default="resample",
        help="how truth subsets are drawn per repeat",
    )
    _add_kernel_flags(p_sweep)
    _add_common(p_sweep)

    p_train = sub.add_parser("train-rbm", help="train and persist an RBM")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--shape", type=_parse_shape, default=None)
    p_train.add_argument("--model-out", required=True, help="output PTMMDRBM path")
    p_train.add_argument("--hidden", type=int, default=128)
    p_train.add_argument("--epochs", type=int, default=30)
    p_train.add_argument("--lr", type=float, default=0.05)
    p_train.add_argument("--batch", type=int, default=64)
    p_train.add_argument("--train-subset", type=int, default=5000)
    p_train.add_argument("--binarize", type=float, default=0.5)
    _add_common(p_train)

    p_cdf = sub.add_parser("cdf", help="empirical CDFs from a stored series")
    p_cdf.add_argument(
        "series", help="series.csv written by `test`, or its directory"
    )
    _add_common(p_cdf)

    return parser


def _apply_config_file(argv: list[str]) -> list[str]:
    """Splice key=value file entries in as flags ahead of the explicit ones."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise CapacityError("--config needs a file path")
    tokens: list[str] = []
    with open(argv[idx + 1]) as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CapacityError(
                    f"{argv[idx + 1]}:{line_no}: expected key=value, got {line!r}"
                )
            key, _, value = line.partition("=")
            tokens += [f"--{key.strip().replace('_', '-')}", value.strip()]
    # insert after the subcommand so explicit flags (later) win
    return argv[:1] + tokens + argv[1:]


def _sorted_rows(data: np.ndarray) -> np.ndarray:
    return data[np.lexsort(data.T[::-1])]


def _series_rows(results: list[PermutationTestResult]):
    rows = [("baseline", float(r.baseline)) for r in results]
    for r in results:
        rows += [("permutation", float(v)) for v in r.permuted]
    return rows


def _write_test_outputs(
    out: str,
    results: list[PermutationTestResult],
    report: dict,
) -> None:
    os.makedirs(out, exist_ok=True)
    reports.write_json(os.path.join(out, "report.json"), report)
    reports.write_csv(
        os.path.join(out, "pvalues.csv"),
        ["repeat", "p_value", "theta", "sigma"],
        [
            (i, float(r.p_value), float(r.baseline), float(r.sigma))
            for i, r in enumerate(results)
        ],
    )
    series = _series_rows(results)
    reports.write_csv(os.path.join(out, "series.csv"), ["series", "value"], series)
    baseline_pairs = ecdf([r.baseline for r in results])
    permuted_pairs = ecdf(np.concatenate([r.permuted for r in results]))
    reports.cdf_chart(os.path.join(out, "cdf.svg"), baseline_pairs, permuted_pairs)


def cmd_test(args: argparse.Namespace) -> int:
    x = load_samples(args.dir_x, args.shape)
    y = load_samples(args.dir_y, args.shape)
    if os.path.realpath(args.dir_x) == os.path.realpath(args.dir_y):
        raise CapacityError(
            "the two sources are the same path; pooled duplicates make the "
            "permutation null degenerate (split the corpus disjointly instead)"
        )
    if x.data.shape == y.data.shape and np.array_equal(
        _sorted_rows(x.data), _sorted_rows(y.data)
    ):
        raise CapacityError(
            "the two sources hold identical sample multisets; pooled "
            "duplicates make the permutation null degenerate"
        )
    kcfg = KernelConfig(
        distance=DistanceKind(args.distance),
        sigma=args.sigma,
        estimator=Estimator(args.estimator),
    )
    tcfg = TestConfig(
        permutations=args.permutations, seed=args.seed, mode=TestMode(args.mode)
    )
    if args.repeats < 1:
        raise CapacityError(f"--repeats must be positive, got {args.repeats}")

    results: list[PermutationTestResult] = []
    if args.repeats == 1:
        results.append(permutation_test(x, y, kcfg, tcfg))
        summary = summarize_pvalues([results[0].p_value])
    else:
        if args.set_size is None:
            raise CapacityError("--set-size is required when --repeats > 1")
        disjoint = args.subset_mode == "disjoint"
        x_provider = subset_provider(
            x, args.set_size, args.repeats, derive_seed(args.seed, 101), disjoint
        )
        y_provider = subset_provider(
            y, args.set_size, args.repeats, derive_seed(args.seed, 202), disjoint
        )
        summary = monte_carlo_pvalues(
            x_provider,
            y_provider,
            (args.set_size, args.set_size),
            args.repeats,
            kcfg,
            tcfg,
            on_result=lambda _r, res: results.append(res),
            jobs=args.jobs,
        )

    first = results[0]
    report = {
        "theta": float(first.baseline) if args.repeats == 1 else float(np.mean([r.baseline for r in results])),
        "p_value": summary.mean,
        "sigma": float(first.sigma),
        "estimator": kcfg.estimator.value,
        "distance": kcfg.distance.value,
        "n": first.n,
        "m": first.m,
        "permutations": tcfg.permutations,
        "seed": args.seed,
        "mode": tcfg.mode.value,
        "alpha": args.alpha,
        "repeats": args.repeats,
        "ci95_half_width": summary.half_width_95,
    }
    _write_test_outputs(args.out, results, report)
    verdict = "pass" if summary.mean >= args.alpha else "reject"
    print(
        f"p={summary.mean:.6g} theta={report['theta']:.6g} sigma={first.sigma:.6g} "
        f"n={first.n} m={first.m} N={tcfg.permutations} "
        f"{kcfg.distance.value}/{kcfg.estimator.value}/{tcfg.mode.value} -> {verdict}"
    )
    return EXIT_OK if summary.mean >= args.alpha else EXIT_REJECT


def _sweep_distances(choice: str) -> list[DistanceKind]:
    if choice == "both":
        return [DistanceKind.EUCLIDEAN, DistanceKind.HAAR]
    return [DistanceKind(choice)]


def cmd_sweep_rbm(args: argparse.Namespace) -> int:
    truth = binarize(load_samples(args.data, args.shape), args.binarize)
    distances = _sweep_distances(args.sweep_distance)
    if DistanceKind.HAAR in distances:
        truth.shape.require_haar()

    if args.model is not None:
        model = load_model(args.model)
    else:
        pool = SampleSet(
            truth.data[: min(args.train_subset, len(truth))], truth.shape, "train"
        )
        print(f"training RBM: {len(pool)} rows, {args.hidden} hidden, {args.epochs} epochs")
        model = train_cd1(
            pool,
            hidden=args.hidden,
            epochs=args.epochs,
            learning_rate=args.lr,
            batch=args.batch,
            seed=args.seed,
            on_epoch=lambda e, err: print(f"epoch {e}: recon {err:.4f}"),
        )
    if model.visible_units != truth.shape.pixels:
        raise DimensionError(
            f"model has {model.visible_units} visible units, data rows have "
            f"{truth.shape.pixels} entries"
        )

    # validate the full truth-sample budget before any generation happens
    if args.truth_mode == "disjoint":
        needed = args.set_size * args.repeats
        if needed > len(truth):
            raise CapacityError(
                f"disjoint truth mode needs {needed} rows "
                f"({args.set_size} x {args.repeats}), corpus has {len(truth)}"
            )
    elif args.set_size > len(truth):
        raise CapacityError(
            f"set size {args.set_size} exceeds the {len(truth)}-row corpus"
        )

    estimator = Estimator(args.estimator)
    tcfg = TestConfig(
        permutations=args.permutations, seed=args.seed, mode=TestMode(args.mode)
    )
    probe_ref = subset_provider(
        truth, min(args.probe_size, len(truth)), 1, derive_seed(args.seed, 7)
    )(0)

    cells = [(b, s) for b in args.bitwidths for s in args.sigmoids]
    pvalue_rows = []
    summary_rows = []
    format_rows = []
    for cell_idx, (bitwidth, sigmoid) in enumerate(cells):
        fmt = sweep_fraction_split(
            model,
            bitwidth,
            probe_ref,
            KernelConfig(distance=DistanceKind.EUCLIDEAN, estimator=estimator),
            InferenceConfig(
                sigmoid=sigmoid,
                gibbs_steps=args.gibbs_steps,
                seed=derive_seed(args.seed, cell_idx, 9),
            ),
            probe_size=args.probe_size,
        )
        format_rows.append((bitwidth, sigmoid.value, fmt.int_bits, fmt.frac_bits))
        for dist_idx, dist in enumerate(distances):
            kcfg = KernelConfig(distance=dist, sigma=args.sigma, estimator=estimator)
            x_provider = subset_provider(
                truth,
                args.set_size,
                args.repeats,
                derive_seed(args.seed, cell_idx, dist_idx, 1),
                disjoint=args.truth_mode == "disjoint",
            )

            def y_provider(r: int, _s=sigmoid, _f=fmt, _ci=cell_idx, _di=dist_idx):
                return gibbs_generate(
                    model,
                    args.set_size,
                    InferenceConfig(
                        sigmoid=_s,
                        fixed_format=_f,
                        gibbs_steps=args.gibbs_steps,
                        seed=derive_seed(args.seed, _ci, _di, 2, r),
                    ),
                    shape=truth.shape,
                )

            summary = monte_carlo_pvalues(
                x_provider,
                y_provider,
                (args.set_size, args.set_size),
                args.repeats,
                kcfg,
                replace(tcfg, seed=derive_seed(args.seed, cell_idx, dist_idx, 3)),
                jobs=args.jobs,
            )
            for r, p in enumerate(summary.samples):
                pvalue_rows.append((dist.value, bitwidth, sigmoid.value, r, p))
            summary_rows.append(
                (dist.value, bitwidth, sigmoid.value, summary.mean, summary.half_width_95)
            )
            print(
                f"bitwidth {bitwidth:>2} sigmoid {sigmoid.value:<5} {dist.value:<10} "
                f"n.m={fmt.int_bits}.{fmt.frac_bits} mean_p={summary.mean:.4f} "
                f"ci95={summary.half_width_95:.4f}"
            )

    os.makedirs(args.out, exist_ok=True)
    reports.write_csv(
        os.path.join(args.out, "pvalues.csv"),
        ["distance", "bitwidth", "sigmoid", "repeat", "p_value"],
        pvalue_rows,
    )
    reports.write_csv(
        os.path.join(args.out, "summary.csv"),
        ["distance", "bitwidth", "sigmoid", "mean_p", "ci95_half_width"],
        summary_rows,
    )
    reports.write_csv(
        os.path.join(args.out, "formats.csv"),
        ["bitwidth", "sigmoid", "int_bits", "frac_bits"],
        format_rows,
    )
    for dist in distances:
        reports.sweep_chart(
            os.path.join(args.out, f"sweep_{dist.value}.svg"),
            summary_rows,
            dist.value,
            args.alpha,
        )
    return EXIT_OK


def cmd_train_rbm(args: argparse.Namespace) -> int:
    data = binarize(load_samples(args.data, args.shape), args.binarize)
    pool = SampleSet(
        data.data[: min(args.train_subset, len(data))], data.shape, "train"
    )
    model = train_cd1(
        pool,
        hidden=args.hidden,
        epochs=args.epochs,
        learning_rate=args.lr,
        batch=args.batch,
        seed=args.seed,
        on_epoch=lambda e, err: print(f"epoch {e}: recon {err:.4f}"),
    )
    out_dir = os.path.dirname(os.path.abspath(args.model_out))
    os.makedirs(out_dir, exist_ok=True)
    save_model(model, args.model_out)
    print(
        f"saved {model.visible_units}x{model.hidden_units} model to {args.model_out}"
    )
    return EXIT_OK


def cmd_cdf(args: argparse.Namespace) -> int:
    path = args.series
    if os.path.isdir(path):
        path = os.path.join(path, "series.csv")
    header, rows = reports.read_csv(path)
    if header != ["series", "value"]:
        raise CapacityError(f"{path}: expected a series,value CSV, got header {header}")
    baselines = [float(v) for kind, v in rows if kind == "baseline"]
    permuted = [float(v) for kind, v in rows if kind == "permutation"]
    if not baselines or not permuted:
        raise CapacityError(f"{path}: needs at least one baseline and one permutation value")
    baseline_pairs = ecdf(baselines)
    permuted_pairs = ecdf(permuted)
    os.makedirs(args.out, exist_ok=True)
    reports.write_csv(
        os.path.join(args.out, "baseline_cdf.csv"), ["value", "cdf"], baseline_pairs
    )
    reports.write_csv(
        os.path.join(args.out, "permutation_cdf.csv"), ["value", "cdf"], permuted_pairs
    )
    reports.cdf_chart(os.path.join(args.out, "cdf.svg"), baseline_pairs, permuted_pairs)
    # for a single stored test this reproduces its strict-counting p-value
    exceed = sum(1 for v in permuted if v > baselines[0]) / len(permuted)
    print(
        f"baseline values: {len(baselines)}  permutation values: {len(permuted)}  "
        f"strict exceedance of first baseline: {exceed:.6g}"
    )
    return EXIT_OK


_HANDLERS = {
    "test": cmd_test,
    "sweep-rbm": cmd_sweep_rbm,
    "train-rbm": cmd_train_rbm,
    "cdf": cmd_cdf,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv)
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except SystemExit as exc:  # argparse reports usage problems itself
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
        return EXIT_USAGE if code != 0 else EXIT_OK
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
