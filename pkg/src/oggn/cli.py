"""``oggn`` command line: data synthesis, oracle training, inversion, system solving, audits.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
Summaries go to stdout; artifacts go to the files named by ``--out``.
"""

import argparse
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .constraint import ConstraintSpec
from .errors import ConfigError, DomainError, OGGNError, ParseError, ShapeError, TrainingDivergedError
from .generator import (
    Constrained,
    Fixed,
    Free,
    GenerationTask,
    auto_constants,
    load_result,
    oggn_train,
    save_result,
    solve_system,
    verify_result,
)
from .oracle import (
    OracleModel,
    evaluate_oracle,
    load_dataset_csv,
    load_oracle,
    save_dataset_csv,
    save_oracle,
    synth_dataset,
    train_oracle,
)
from .poly import BUILTIN_FUNCTIONS, PolySystem, resolve_function, resolve_system

log = logging.getLogger("oggn")

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(OGGNError):
    pass


def _setup_logging():
    level = os.environ.get("OGGN_LOG", "off").lower()
    levels = {"info": logging.INFO, "debug": logging.DEBUG}
    if level in levels:
        logging.basicConfig(level=levels[level], stream=sys.stderr, format="%(name)s: %(message)s")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _span(text):
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*:\s*([-+0-9.eE]+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected LOW:HIGH, got {text!r}")
    return float(m.group(1)), float(m.group(2))


def _var_index(name, d):
    m = re.fullmatch(r"x(\d+)", name.strip())
    if not m or not 1 <= int(m.group(1)) <= d:
        raise UsageError(f"unknown feature {name!r} (features are x1..x{d})")
    return int(m.group(1)) - 1


def _output_path(out, seed, sweep):
    if not sweep:
        return Path(out)
    out = Path(out)
    return out.with_name(f"{out.stem}.seed{seed}{out.suffix}")


def _write_json_result(result, path, echo):
    save_result(result, path, config_echo=echo)


# ---------------------------------------------------------------- gen-data


def cmd_gen_data(args):
    low, high = args.range
    try:
        f = resolve_function(args.function)
    except ParseError:
        f = resolve_system(args.function)
    data = synth_dataset(f, args.n, low, high, seed=args.seed, function_id=args.function)
    _write(args.out, lambda p: save_dataset_csv(data, p))
    y = data.targets[:, 0]
    print(f"wrote {len(data)} rows to {args.out}")
    print(f"function {args.function}, x in [{low:g}, {high:g}), seed {args.seed}")
    if len(data):
        print(f"target min {y.min():.6g}, max {y.max():.6g}")
    return 0


def _write(path, writer):
    try:
        writer(path)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from exc


# ------------------------------------------------------------ train-oracle


def cmd_train_oracle(args):
    data = load_dataset_csv(args.data)
    test = load_dataset_csv(args.test) if args.test else None
    if test is not None and test.n_features != data.n_features:
        raise UsageError(f"{args.test} has {test.n_features} features, {args.data} has {data.n_features}")
    model = train_oracle(
        data, hidden=tuple(args.hidden), activation=args.activation, epochs=args.epochs,
        batch_size=args.batch, lr=args.lr, seed=args.seed, validation=test,
    )
    model.metadata["data"] = {"train": str(args.data), "test": args.test and str(args.test)}
    _write(args.out, lambda p: save_oracle(model, p))
    tr = model.metadata["train"]
    print(f"wrote oracle to {args.out}")
    print(f"train: mse {tr['mse']:.6g}, mean relative error {tr['mean_rel_error']:.4%}")
    if test is not None:
        te = model.metadata["validation"]
        print(f"test:  mse {te['mse']:.6g}, mean relative error {te['mean_rel_error']:.4%}")
    return 0


def cmd_eval_oracle(args):
    model = _load_oracle_arg(args.oracle)
    data = load_dataset_csv(args.data)
    if data.n_features != model.input_dim:
        raise UsageError(f"{args.data} has {data.n_features} features, oracle takes {model.input_dim}")
    m = evaluate_oracle(model, data)
    print(f"n {m['n']}: mse {m['mse']:.6g}, mean relative error {m['mean_rel_error']:.4%}, "
          f"max relative error {m['max_rel_error']:.4%}")
    return 0


def _load_oracle_arg(spec):
    if spec in BUILTIN_FUNCTIONS:
        return OracleModel.analytic(BUILTIN_FUNCTIONS[spec])
    if not Path(spec).is_file():
        raise UsageError(f"oracle {spec!r} is neither a model file nor a built-in function")
    return load_oracle(spec)


# ------------------------------------------------------------------ invert


def _parse_modes(args, d):
    modes = [Free() for _ in range(d)]
    fixed = {}
    for item in args.fix or []:
        name, _, value = item.partition("=")
        if not value:
            raise UsageError(f"--fix expects NAME=VALUE, got {item!r}")
        j = _var_index(name, d)
        try:
            fixed[j] = float(value)
        except ValueError:
            raise UsageError(f"--fix {item!r}: {value!r} is not a number")
        modes[j] = Fixed(fixed[j])

    auto = args.c1 == "auto" or args.c2 == "auto"
    default_c1 = 20.0 if args.c1 == "auto" else float(args.c1)
    default_c2 = 10.0 if args.c2 == "auto" else float(args.c2)
    explicit = set()
    for item in args.range or []:
        m = re.fullmatch(r"(x\d+)=([^:@]+):([^@]+)(?:@([^,]+),(.+))?", item.strip())
        if not m:
            raise UsageError(f"--range expects NAME=LOW:HIGH[@C1,C2], got {item!r}")
        j = _var_index(m.group(1), d)
        if j in fixed:
            raise UsageError(f"{m.group(1)} is both fixed and ranged")
        try:
            lo, hi = float(m.group(2)), float(m.group(3))
            c1 = float(m.group(4)) if m.group(4) else default_c1
            c2 = float(m.group(5)) if m.group(5) else default_c2
            spec = ConstraintSpec(lo, hi, c1, c2)
        except ValueError as exc:
            raise UsageError(f"--range {item!r}: {exc}")
        if m.group(4):
            explicit.add(j)
        modes[j] = Constrained(spec)
    if all(isinstance(m, Fixed) for m in modes):
        log.info("every feature is fixed; the generator has nothing to learn")
    return modes, (auto, explicit)


def _invert_one(args, seed):
    oracle = _load_oracle_arg(args.oracle)
    truth = resolve_function(args.truth) if args.truth else None
    if truth is not None and truth.n_vars != oracle.input_dim:
        raise UsageError(f"--truth takes {truth.n_vars} features, oracle takes {oracle.input_dim}")
    modes, (auto, explicit) = _parse_modes(args, oracle.input_dim)
    scales = args.scales
    if scales is not None:
        if len(scales) == 1:
            scales = scales * oracle.input_dim
        if len(scales) != oracle.input_dim:
            raise UsageError(f"--scales gives {len(scales)} values for {oracle.input_dim} features")
        scales = [c for c, m in zip(scales, modes) if not isinstance(m, Fixed)]
    task = GenerationTask(
        oracle, args.target, modes, rows=args.rows, noise_dim=args.noise_dim,
        hidden=tuple(args.hidden), max_epochs=args.epochs, lr=args.lr, tolerance=args.tol,
        seed=seed, stop_rule=args.stop.replace("-", "_"), slack=args.slack, truth=truth,
        output_scales=scales,
    )
    if auto and any(isinstance(m, Constrained) for m in modes):
        tuned = auto_constants(task)
        for j, (old, new) in enumerate(zip(modes, tuned)):
            if isinstance(old, Constrained) and j not in explicit:
                c1 = new.spec.c1 if args.c1 == "auto" else old.spec.c1
                c2 = new.spec.c2 if args.c2 == "auto" else old.spec.c2
                modes[j] = Constrained(ConstraintSpec(old.spec.lower, old.spec.upper, c1, c2))
        task = GenerationTask(**{**task.__dict__, "feature_modes": modes, "output_scales": scales})
    result = oggn_train(task)
    echo = {
        "command": "invert",
        "oracle": args.oracle,
        "truth": args.truth,
        "task": task.config(),
    }
    path = _output_path(args.out, seed, args.seeds is not None)
    _write(path, lambda p: _write_json_result(result, p, echo))
    return str(path), result


def _report_invert(path, result, target):
    print(f"wrote {path}: {result.epochs_run} epochs, stop reason {result.stop_reason}, "
          f"best loss {result.best_loss:.6g} at epoch {result.best_epoch}")
    d = result.features.shape[1]
    head = "row  " + "  ".join(f"{'x' + str(j + 1):>11}" for j in range(d)) + f"  {'predicted':>11}"
    if result.true_targets is not None:
        head += f"  {'true':>11}  {'|target-true|':>13}"
    print(head)
    for i, row in enumerate(result.features):
        line = f"{i:<4} " + "  ".join(f"{v:11.4f}" for v in row)
        line += f"  {result.predicted_targets[i, 0]:11.4f}"
        if result.true_targets is not None:
            t = result.true_targets[i, 0]
            line += f"  {t:11.4f}  {abs(target - t):13.4f}"
        print(line)


def _sweep(fn, args, seeds):
    if args.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            return list(pool.map(fn, [args] * len(seeds), seeds))
    return [fn(args, s) for s in seeds]


def cmd_invert(args):
    seeds = args.seeds if args.seeds is not None else [args.seed]
    for path, result in _sweep(_invert_one, args, seeds):
        _report_invert(path, result, args.target)
    return 0


# ------------------------------------------------------------ solve-system


def _solve_one(args, seed):
    system = resolve_system(args.system)
    result = solve_system(
        system, rows=args.rows, noise_dim=args.noise_dim, hidden=tuple(args.hidden),
        max_epochs=args.epochs, lr=args.lr, tolerance=args.tol, seed=seed,
    )
    echo = {"command": "solve-system", "system": args.system, "task": result.config}
    path = _output_path(args.out, seed, args.seeds is not None)
    _write(path, lambda p: _write_json_result(result, p, echo))
    return str(path), result


def cmd_solve_system(args):
    seeds = args.seeds if args.seeds is not None else [args.seed]
    for path, result in _sweep(_solve_one, args, seeds):
        norms = np.sqrt(np.sum(result.residuals**2, axis=1))
        print(f"wrote {path}: {result.epochs_run} epochs, stop reason {result.stop_reason}")
        d = result.features.shape[1]
        m = result.residuals.shape[1]
        print("row  " + "  ".join(f"{'x' + str(j + 1):>10}" for j in range(d))
              + "  " + "  ".join(f"{'r' + str(k + 1):>10}" for k in range(m)) + f"  {'norm':>10}")
        for i in range(result.features.shape[0]):
            print(f"{i:<4} " + "  ".join(f"{v:10.4f}" for v in result.features[i])
                  + "  " + "  ".join(f"{v:10.5f}" for v in result.residuals[i])
                  + f"  {norms[i]:10.5f}")
    return 0


# ------------------------------------------------------------------ verify


def cmd_verify(args):
    result = load_result(args.result)
    truth = resolve_function(args.truth)
    if truth.n_vars != result.features.shape[1]:
        raise UsageError(f"result has {result.features.shape[1]} features, truth takes {truth.n_vars}")
    report = verify_result(result, truth)
    d = truth.n_vars
    print("row  " + "  ".join(f"{'x' + str(j + 1):>11}" for j in range(d))
          + f"  {'predicted':>11}  {'true':>11}  {'|pred-true|':>11}")
    for i, row in enumerate(report):
        print(f"{i:<4} " + "  ".join(f"{v:11.4f}" for v in row["features"])
              + f"  {row['predicted']:11.4f}  {row['true_value']:11.4f}  {row['oracle_gap']:11.4f}")
    return 0


# ------------------------------------------------------------------ parser


def _add_generator_args(p, epochs, lr, tol):
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--rows", type=int, default=8, help="feature vectors generated at once")
    p.add_argument("--noise-dim", type=int, default=16)
    p.add_argument("--hidden", type=_ints, default=[64, 64], help="generator hidden widths, e.g. 64,64")
    p.add_argument("--lr", type=float, default=lr)
    p.add_argument("--tol", type=float, default=tol, help="stop once mean squared error <= TOL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=_ints, default=None, help="sweep: one result file per seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for --seeds")
    p.add_argument("--out", required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="oggn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"oggn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample a synthetic dataset to CSV")
    p.add_argument("--function", default="poly4", help="built-in id (poly4) or system file")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--range", type=_span, default=(0.0, 500.0), help="LOW:HIGH per coordinate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-oracle", help="fit a neural oracle to a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--test", default=None)
    p.add_argument("--hidden", type=_ints, default=[64, 64])
    p.add_argument("--activation", choices=["tanh", "relu"], default="tanh")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_oracle)

    p = sub.add_parser("eval-oracle", help="score an oracle on a CSV dataset")
    p.add_argument("--oracle", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval_oracle)

    p = sub.add_parser("invert", help="generate features that reach a target")
    p.add_argument("--oracle", required=True, help="model file or built-in function id")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--fix", action="append", metavar="xJ=VALUE")
    p.add_argument("--range", action="append", metavar="xJ=LOW:HIGH[@C1,C2]")
    p.add_argument("--c1", default="20", help="shrink divisor, or 'auto'")
    p.add_argument("--c2", default="10", help="growth multiplier, or 'auto'")
    p.add_argument("--stop", choices=["tolerance", "range-exit"], default="tolerance")
    p.add_argument("--slack", type=float, default=0.01)
    p.add_argument("--truth", default=None, help="audit against a built-in function id or file")
    p.add_argument("--scales", type=_floats, default=None,
                   help="per-feature output scale (one value applies to all); default from the oracle")
    _add_generator_args(p, epochs=2000, lr=1e-3, tol=None)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("solve-system", help="find a common root of an equation system")
    p.add_argument("--system", required=True, help="system file or built-in id (demo-system)")
    _add_generator_args(p, epochs=5000, lr=1e-3, tol=1e-4)
    p.set_defaults(func=cmd_solve_system)

    p = sub.add_parser("verify", help="audit a result file against the true function")
    p.add_argument("--result", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("c1", "c2"):
        value = getattr(args, name, None)
        if value is not None and value != "auto":
            try:
                float(value)
            except ValueError:
                parser.error(f"--{name} must be a number or 'auto', got {value!r}")
    try:
        return args.func(args)
    except (TrainingDivergedError, DomainError) as exc:
        print(f"oggn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ConfigError, ParseError, ShapeError, ValueError) as exc:
        print(f"oggn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
