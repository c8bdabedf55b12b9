"""``invmds`` command line.

Exit codes: 0 success, 1 property violation, 2 input or usage error,
3 degenerate data, 4 internal or convergence failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import io as fio
from .embed import match_up_to_sign, select_sign, sign_variants, tinv_embed, verify_distance_preservation
from .exceptions import (
    ConfigurationError,
    ConvergenceError,
    DegenerateInputError,
    InvalidInputError,
    TrainingDivergenceError,
)
from .geometry import SHAPE_KINDS, generate_cvrp_instance, generate_shape, generate_tsp_instance, random_transform
from .neuralnet import TrainConfig
from .tasks import (
    PROTOCOLS,
    ROUTING_SETTINGS,
    EdgeScorer,
    bench_scaling,
    make_classification_dataset,
    routing_invariance_suite,
    run_classification_protocol,
    score_model_pipeline,
    tour_length,
    write_report_csv,
    write_report_json,
    _transform_instance,
)

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_DEGENERATE, EXIT_INTERNAL = 0, 1, 2, 3, 4
DEFAULT_SEED = 42
GLOBAL_DEFAULTS = {"seed": DEFAULT_SEED, "tol": 1e-6, "sign": "canonical", "dim": None, "out": None}
VERIFY_SETTINGS = ("translation", "rotation", "reflection", "scaling", "composed")


class PropertyViolation(Exception):
    pass


def _seed(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be a non-negative integer")
    return v


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _global_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    s = argparse.SUPPRESS
    g.add_argument("--seed", type=_seed, default=s, help=f"root random seed (default {DEFAULT_SEED})")
    g.add_argument("--tol", type=float, default=s, help="property tolerance (default 1e-6)")
    g.add_argument("--sign", choices=("raw", "canonical", "enumerate"), default=s, help="sign handling (default canonical)")
    g.add_argument("--dim", type=int, default=s, help="embedding width k (default: coordinate dimension)")
    g.add_argument("--out", default=s, help="output file or directory")
    return p


def build_parser():
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="invmds", description="Similarity-invariant point embeddings.",
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("embed", parents=[common], help="embed a point CSV")
    p.add_argument("points", help="CSV with header x,y[,z][,label]")

    p = sub.add_parser("verify", parents=[common], help="check distance preservation and invariance on a cloud")
    p.add_argument("points")
    p.add_argument("--transforms", type=int, default=100, help="number of random transforms (default 100)")

    p = sub.add_parser("gen", parents=[common], help="generate synthetic data")
    p.add_argument("kind", choices=SHAPE_KINDS + ("tsp", "cvrp", "dataset"))
    p.add_argument("--n", type=int, default=64, help="points per cloud / instance size")
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--n-train", type=int, default=300)
    p.add_argument("--n-test", type=int, default=100)

    p = sub.add_parser("bench", parents=[common], help="time the embedding against cloud size")
    p.add_argument("--sizes", type=_int_list, default=[128, 256, 512, 1024, 2048, 4096])
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--d", type=int, default=3)

    p = sub.add_parser("train-demo", parents=[common], help="train a classifier under a rotation protocol")
    p.add_argument("--protocol", choices=sorted(PROTOCOLS), default="z/z")
    p.add_argument("--mode", choices=("tinv", "raw"), default="tinv")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--n-train", type=int, default=300)
    p.add_argument("--n-test", type=int, default=100)

    p = sub.add_parser("route-demo", parents=[common], help="scored greedy routing under transforms")
    p.add_argument("--task", choices=("tsp", "cvrp"), default="tsp")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--settings", default="all", help="'all' or a comma list of " + ",".join(ROUTING_SETTINGS))
    p.add_argument("--mode", choices=("tinv", "raw"), default="tinv")
    p.add_argument("--instances", type=int, default=1)

    p = sub.add_parser("report", parents=[common], help="run every driver at small scale and write CSV + JSON")
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--epochs", type=int, default=20)
    return parser


def _mode(name):
    return "raw_coords" if name == "raw" else name


def _out(args, default):
    return args.out if args.out else default


# --------------------------------------------------------------------------
# commands


def cmd_embed(args):
    cloud = fio.read_points_csv(args.points)
    E = tinv_embed(cloud, args.dim)
    stem = os.path.splitext(args.points)[0]
    out = _out(args, stem + "_embedding.csv")
    if args.sign == "enumerate":
        root, ext = os.path.splitext(out)
        for V in sign_variants(select_sign(E, "canonical")):
            path = f"{root}_v{V.sign_mode.split(':')[1]}{ext or '.csv'}"
            fio.write_embedding(V, path)
            print(path)
    else:
        E = select_sign(E, args.sign)
        fio.write_embedding(E, out)
        print(out)
        if E.is_ambiguous:
            print(f"warning: sign ambiguous in columns {list(E.ambiguous_columns)}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    cloud = fio.read_points_csv(args.points)
    if args.transforms < 1:
        raise ConfigurationError("--transforms must be >= 1")
    tol = args.tol
    E = select_sign(tinv_embed(cloud, args.dim), "canonical")
    print(f"# verify transforms={args.transforms} tol={tol:.3g} seed={args.seed} n={cloud.n} d={cloud.d}")
    dist_err, c = verify_distance_preservation(cloud, E)
    print(f"distance_preservation max_rel_error={dist_err:.3e} c_prime={c:.17g}")
    if dist_err > tol:
        raise PropertyViolation(json.dumps({"check": "distance_preservation", "error": dist_err}))
    worst_sign = worst_exact = 0.0
    skipped = 0
    for i, ss in enumerate(np.random.SeedSequence(args.seed).spawn(args.transforms)):
        T = random_transform(ss, VERIFY_SETTINGS[i % len(VERIFY_SETTINGS)], d=cloud.d)
        E2 = select_sign(tinv_embed(T.apply(cloud), args.dim), "canonical")
        if E.multiplicity_warning or E2.multiplicity_warning:
            skipped += 1
            continue
        up_to_sign = float(match_up_to_sign(E.H, E2.H).max(initial=0.0))
        worst_sign = max(worst_sign, up_to_sign)
        bad = up_to_sign > tol
        if not (E.is_ambiguous or E2.is_ambiguous):
            exact = float(np.max(np.abs(E.H - E2.H), initial=0.0))
            worst_exact = max(worst_exact, exact)
            bad = bad or exact > tol
        if bad:
            raise PropertyViolation(json.dumps({"check": "invariance", "transform": T.to_dict(),
                                                "error": max(up_to_sign, worst_exact)}))
    print(f"invariance_up_to_sign max_abs_error={worst_sign:.3e}")
    print(f"invariance_canonical max_abs_error={worst_exact:.3e}")
    print(f"skipped_multiplicity={skipped}")
    return EXIT_OK


def cmd_gen(args):
    seed = args.seed
    if args.kind in SHAPE_KINDS:
        out = _out(args, f"{args.kind}.csv")
        fio.write_points_csv(generate_shape(args.kind, args.n, args.noise, seed), out)
    elif args.kind == "tsp":
        out = _out(args, f"tsp{args.n}.csv")
        fio.write_points_csv(generate_tsp_instance(args.n, seed), out)
    elif args.kind == "cvrp":
        out = _out(args, f"cvrp{args.n}.json")
        fio.write_cvrp_json(generate_cvrp_instance(args.n, seed), out)
    else:
        out = _out(args, "dataset")
        ds = make_classification_dataset(args.n_train, args.n_test, args.n, args.noise, seed=seed)
        for split, clouds in (("train", ds.train), ("test", ds.test)):
            os.makedirs(os.path.join(out, split), exist_ok=True)
            entries = []
            for i, c in enumerate(clouds):
                rel = os.path.join(split, f"{i:05d}.csv")
                fio.write_points_csv(c, os.path.join(out, rel))
                entries.append((rel, c.cloud_label))
            fio.write_manifest(entries, os.path.join(out, f"{split}.json"))
    print(out)
    return EXIT_OK


def cmd_bench(args):
    res = bench_scaling(args.sizes, args.repeats, d=args.d, seed=args.seed)
    out = _out(args, "bench.csv")
    res.to_gnuplot(out)
    for n, m, s in res.rows():
        print(f"n={n} mean_seconds={m:.6f} std_seconds={s:.6f}")
    print(f"slope {res.slope:.4f}")
    return EXIT_OK


def cmd_train_demo(args):
    ds = make_classification_dataset(args.n_train, args.n_test, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, rng_seed=args.seed)
    res = run_classification_protocol(ds, args.protocol, _mode(args.mode), cfg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        res.model.save(os.path.join(args.out, "model.json"))
        res.log.to_csv(os.path.join(args.out, "training_log.csv"))
        write_report_csv([("classification", args.protocol, _mode(args.mode), "accuracy", res.accuracy)],
                         os.path.join(args.out, "report.csv"))
    print(f"protocol={args.protocol} mode={args.mode} accuracy={res.accuracy:.4f}")
    return EXIT_OK


def _settings(text):
    if text == "all":
        return ROUTING_SETTINGS
    out = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in out if s not in ROUTING_SETTINGS]
    if bad:
        raise ConfigurationError(f"unknown settings {bad}; choose from {list(ROUTING_SETTINGS)}")
    if "none" not in out:
        out = ("none",) + out
    return out


def cmd_route_demo(args):
    settings = _settings(args.settings)
    mode = _mode(args.mode)
    scorer = EdgeScorer(2, rng_seed=args.seed)
    if args.instances > 1:
        rep = routing_invariance_suite(args.task, args.n, args.instances, mode, args.seed, settings, scorer)
        rows = rep.rows()
        for s in settings:
            print(f"{s} identity_rate={rep.identity_rate[s]:.4f} mean_normalized_length="
                  f"{rep.mean_normalized_length[s]:.10f}")
    else:
        gen = generate_tsp_instance if args.task == "tsp" else generate_cvrp_instance
        inst = gen(args.n, args.seed)
        base = score_model_pipeline(inst, scorer, mode)
        rows = []
        for i, s in enumerate(settings):
            T = random_transform([args.seed, i], s, d=2)
            moved = _transform_instance(inst, T)
            tour = score_model_pipeline(moved, scorer, mode)
            length = tour_length(moved, tour)
            norm = length / T.scale_factor
            same = tour.same_as(base)
            print(f"{s} length={length:.10f} normalized_length={norm:.10f} same_tour={same}")
            rows += [(f"{args.task}{args.n}", s, mode, "length", length),
                     (f"{args.task}{args.n}", s, mode, "normalized_length", norm),
                     (f"{args.task}{args.n}", s, mode, "same_tour", float(same))]
    if args.out:
        write_report_csv(rows, args.out)
    return EXIT_OK


def cmd_report(args):
    out = _out(args, "report")
    os.makedirs(out, exist_ok=True)
    rows, summary = [], {"seed": args.seed, "classification": {}, "routing": {}, "scaling": {}}
    ds = make_classification_dataset(seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, rng_seed=args.seed)
    for mode in ("tinv", "raw_coords"):
        summary["classification"][mode] = {}
        for name in PROTOCOLS:
            res = run_classification_protocol(ds, name, mode, cfg)
            summary["classification"][mode][name] = res.accuracy
            rows.append(("classification", name, mode, "accuracy", res.accuracy))
    for task, n in (("tsp", 20), ("tsp", 50), ("tsp", 100), ("cvrp", 20), ("cvrp", 50)):
        key = f"{task}{n}"
        summary["routing"][key] = {}
        for mode in ("tinv", "raw_coords"):
            rep = routing_invariance_suite(task, n, args.instances, mode, args.seed, scorer_seed=args.seed)
            rows += rep.rows()
            summary["routing"][key][mode] = {
                s: {"identity_rate": rep.identity_rate[s], "mean_length": rep.mean_length[s],
                    "mean_normalized_length": rep.mean_normalized_length[s]}
                for s in rep.identity_rate
            }
    bench = bench_scaling((128, 256, 512, 1024), repeats=3, seed=args.seed)
    bench.to_gnuplot(os.path.join(out, "bench.csv"))
    summary["scaling"] = {"sizes": bench.sizes, "mean_seconds": bench.mean_seconds, "slope": bench.slope}
    rows.append(("scaling", "none", "tinv", "loglog_slope", bench.slope))
    write_report_csv(rows, os.path.join(out, "report.csv"))
    write_report_json(summary, os.path.join(out, "report.json"))
    print(out)
    return EXIT_OK


COMMANDS = {
    "embed": cmd_embed,
    "verify": cmd_verify,
    "gen": cmd_gen,
    "bench": cmd_bench,
    "train-demo": cmd_train_demo,
    "route-demo": cmd_route_demo,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for k, v in GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    try:
        return COMMANDS[args.command](args)
    except PropertyViolation as exc:
        print(f"property violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except DegenerateInputError as exc:
        print(f"degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InvalidInputError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, TrainingDivergenceError) as exc:
        print(f"internal failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
