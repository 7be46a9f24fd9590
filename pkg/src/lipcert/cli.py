"""Command-line surface: reproducible report-emitting runs.

Every command that writes files also drops a ``manifest.json`` next to them
recording the exact invocation, seeds, input digests and version, so a run
can be reproduced byte-for-byte (the manifest timestamp excepted).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import atomic_bound, paired_exact, paired_relaxed, two_layer_weights
from .certify import attack_check, build_pair_bounds, certified_accuracy_curve
from .data import load_spec
from .errors import (CapacityError, IntegrityError, LipcertError, ParseError,
                     UsageError)
from .linalg import PNorm
from .model import load_network, save_network
from .propcert import (min_cross_class_distance, prop1_certify_training,
                       separation_stats)
from .pwl import check_theorem1, extract_slice, random_unit_inf_direction
from .train import TrainConfig, train_penalized


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, args, inputs, seed=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "seed": seed,
        "inputs": {str(p): _digest(p) for p in inputs if Path(p).exists()},
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _spec_input_paths(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "csv":
        return [rest]
    if kind == "idx":
        return rest.split(",")[:2]
    return []


def _parse_eps_grid(text: str):
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"bad eps grid {text!r}: expected a:b:step")
    if step <= 0:
        raise UsageError("eps grid step must be positive")
    n = int(np.floor((b - a) / step + 0.5)) + 1
    grid = a + step * np.arange(max(n, 1))
    return grid[grid <= b + step / 2.0]


def _parse_vector(text: str, dim: int, seed: int, unit_inf: bool):
    if text == "random":
        rng = np.random.default_rng(seed)
        if unit_inf:
            return random_unit_inf_direction(dim, rng)
        return rng.uniform(-1.0, 1.0, size=dim)
    try:
        v = np.array([float(x) for x in text.split(",")], dtype=np.float64)
    except ValueError:
        raise UsageError(f"bad vector {text!r}: expected comma-separated numbers")
    if v.size != dim:
        raise UsageError(f"vector has length {v.size}, expected {dim}")
    return v


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_bound(args):
    net = load_network(args.net)
    p = PNorm.parse(args.p)
    pair = None
    if args.pair:
        try:
            pair = tuple(int(v) for v in args.pair.split(","))
            if len(pair) != 2:
                raise ValueError
        except ValueError:
            raise UsageError(f"bad --pair {args.pair!r}: expected i,j")
    if args.method == "atomic":
        b = atomic_bound(net, p)
    elif args.method == "paired-exact":
        W1, W2 = two_layer_weights(net)
        i, j = pair if pair else (None, None)
        b = paired_exact(W1, W2, i, j, limit=args.limit)
    else:
        W1, W2 = two_layer_weights(net)
        b = paired_relaxed(W1, W2)
    print(b.value)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report = {"value": b.value, "method": b.method, "p": str(b.p),
                  "meta": b.meta, "net": str(args.net)}
        with open(out / "bound.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        _write_manifest(out, args, [args.net])
    return 0


def cmd_certify(args):
    net = load_network(args.net)
    data = load_spec(args.data)
    p = PNorm.parse(args.p)
    grid = _parse_eps_grid(args.eps_grid)
    if grid.size == 0:
        raise UsageError("empty eps grid")
    K = build_pair_bounds(net, p, method=args.method, limit=args.limit)
    report = certified_accuracy_curve(net, data, grid, K,
                                      bound_method=args.method, p=p)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "per_example.csv",
               ["index", "pred", "label", "radius"],
               [(i, pred, int(data.labels[i]), repr(r))
                for i, pred, _, r in report.per_example])
    _write_csv(out / "curve.csv", ["epsilon", "certified_accuracy"],
               [(repr(e), repr(acc)) for e, acc in report.curve])
    _write_manifest(out, args, [args.net, *_spec_input_paths(args.data)])
    print(f"clean accuracy {report.clean_accuracy}")
    return 0


def cmd_separation(args):
    data = load_spec(args.data)
    if args.subsample:
        data = data.subsample(args.subsample, args.seed)
    p = PNorm.parse(args.p)
    stats = separation_stats(data, p, args.percentile)
    print(f"L{args.p} percentile {args.percentile}: c = {stats.percentile_c}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "separation.csv", ["example_index", "nn_distance"],
                   [(i, repr(float(d)))
                    for i, d in enumerate(stats.per_example_nn_dist)])
        with open(out / "summary.txt", "w", encoding="utf-8") as fh:
            fh.write(f"p={args.p} percentile={args.percentile} "
                     f"c={stats.percentile_c}\n")
        _write_manifest(out, args, _spec_input_paths(args.data), seed=args.seed)
    return 0


def cmd_prop1(args):
    data = load_spec(args.data)
    if args.subsample:
        data = data.subsample(args.subsample, args.seed)
    p = PNorm.parse(args.p)
    c = args.c if args.c is not None else \
        min_cross_class_distance(data, p) * (1.0 - 1e-9)
    report = prop1_certify_training(data, c, p, args.trials, args.seed)
    print(f"c = {c}; checked {report.checked} perturbations; "
          f"{len(report.violations)} violations")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "violations.csv",
                   ["example_index", "true_label", "predicted_label"],
                   [(i, t, pr) for i, t, pr, _ in report.violations])
        _write_manifest(out, args, _spec_input_paths(args.data), seed=args.seed)
    return 0 if report.ok else 1


def cmd_slice(args):
    net = load_network(args.net)
    w0 = _parse_vector(args.w0, net.in_dim, args.seed, unit_inf=True)
    b0 = _parse_vector(args.b0, net.in_dim, args.seed + 1, unit_inf=False) \
        if args.b0 else np.zeros(net.in_dim)
    pwl = extract_slice(net, w0, b0)
    rows = [("-inf", repr(float(pwl.slopes[0])))]
    for bp, s in zip(pwl.breakpoints, pwl.slopes[1:]):
        rows.append((repr(float(bp)), repr(float(s))))
    print(f"{pwl.breakpoints.size} breakpoints")
    report = None
    if args.check_theorem1:
        report = check_theorem1(net, w0, b0)
        status = "SATISFIED" if report.satisfied else "VIOLATED"
        print(f"I = {report.intrinsic_variability}, 2k = {report.bound_2k}, "
              f"{status}, slack {report.slack}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "pwl.csv", ["segment_start", "slope"], rows)
        if report is not None:
            with open(out / "variability.json", "w", encoding="utf-8") as fh:
                json.dump({
                    "total_variation": report.total_variation,
                    "intrinsic_variability": report.intrinsic_variability,
                    "bound_2k": report.bound_2k,
                    "slack": report.slack,
                    "satisfied": report.satisfied,
                }, fh, indent=2)
                fh.write("\n")
        _write_manifest(out, args, [args.net], seed=args.seed)
    if report is not None and not report.satisfied:
        return 1
    return 0


def cmd_train(args):
    data = load_spec(args.data)
    try:
        hidden = tuple(int(h) for h in args.hidden.split(","))
    except ValueError:
        raise UsageError(f"bad --hidden {args.hidden!r}")
    cfg = TrainConfig(hidden_dims=hidden, p=PNorm.parse(args.p),
                      penalty_weight=args.penalty, epochs=args.epochs,
                      batch_size=args.batch, learning_rate=args.lr,
                      seed=args.seed)
    net, history = train_penalized(data, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_network(net, out)
    _write_csv(out.with_suffix(out.suffix + ".history.csv"),
               ["epoch", "loss", "penalty", "bound", "accuracy"],
               [(h.epoch, repr(h.loss), repr(h.penalty), repr(h.bound),
                 repr(h.accuracy)) for h in history])
    _write_manifest(out.parent, args, _spec_input_paths(args.data),
                    seed=args.seed)
    last = history[-1]
    print(f"final loss {last.loss}, bound {last.bound}, accuracy {last.accuracy}")
    return 0


def cmd_attack_check(args):
    net = load_network(args.net)
    data = load_spec(args.data)
    p = PNorm.parse(args.p)
    K = build_pair_bounds(net, p, method=args.method, limit=args.limit)
    from .certify import certified_radius
    violations = 0
    for i in range(data.n):
        r = certified_radius(net, data.points[i], int(data.labels[i]), K)
        if r == 0.0:
            continue
        res = attack_check(net, data.points[i], int(data.labels[i]), r,
                           args.trials, args.seed + i, p)
        if res.violated:
            violations += 1
            print(f"VIOLATION at example {i}: radius {r}")
    print(f"{violations} violations over {data.n} examples")
    return 0 if violations == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lipcert",
                                 description="Lipschitz certification toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="compute a Lipschitz bound for a network")
    b.add_argument("--net", required=True)
    b.add_argument("--p", default="inf")
    b.add_argument("--method", default="atomic",
                   choices=["atomic", "paired-exact", "paired-relaxed"])
    b.add_argument("--pair", default=None, help="class pair i,j")
    b.add_argument("--limit", type=int, default=20)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bound)

    c = sub.add_parser("certify", help="certified accuracy curve over an eps grid")
    c.add_argument("--net", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--p", default="inf")
    c.add_argument("--method", default="atomic",
                   choices=["atomic", "paired-exact"])
    c.add_argument("--eps-grid", required=True, help="a:b:step")
    c.add_argument("--limit", type=int, default=20)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("separation", help="nearest out-of-class distance stats")
    s.add_argument("--data", required=True)
    s.add_argument("--p", default="inf")
    s.add_argument("--percentile", type=float, default=95.0)
    s.add_argument("--subsample", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_separation)

    pr = sub.add_parser("prop1", help="nearest-neighbor certificate stress test")
    pr.add_argument("--data", required=True)
    pr.add_argument("--p", default="inf")
    pr.add_argument("--c", type=float, default=None)
    pr.add_argument("--trials", type=int, default=100)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--subsample", type=int, default=None)
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=cmd_prop1)

    sl = sub.add_parser("slice", help="piecewise-linear restriction along a line")
    sl.add_argument("--net", required=True)
    sl.add_argument("--w0", required=True, help="comma-separated or 'random'")
    sl.add_argument("--b0", default=None, help="comma-separated or 'random'")
    sl.add_argument("--check-theorem1", action="store_true")
    sl.add_argument("--seed", type=int, default=0)
    sl.add_argument("--out", default=None)
    sl.set_defaults(func=cmd_slice)

    t = sub.add_parser("train", help="SGD with Lipschitz-product penalty")
    t.add_argument("--data", required=True)
    t.add_argument("--hidden", required=True, help="H[,H...]")
    t.add_argument("--p", default="inf")
    t.add_argument("--lambda", dest="penalty", type=float, default=0.0)
    t.add_argument("--epochs", type=int, default=50)
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("attack-check", help="probe certified radii for flips")
    a.add_argument("--net", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--p", default="inf")
    a.add_argument("--method", default="atomic",
                   choices=["atomic", "paired-exact"])
    a.add_argument("--trials", type=int, default=1000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--limit", type=int, default=20)
    a.set_defaults(func=cmd_attack_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, CapacityError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except IntegrityError as e:
        print(f"integrity error: {e}", file=sys.stderr)
        return 1
    except LipcertError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
