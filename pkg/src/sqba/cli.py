"""Command-line entry point: ``sqba {data,train,attack,sweep,angles,dgm}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as datasets
from .baselines import HsjaConfig, hsja_attack
from .dgm import DgmConfig, dgm_attack
from .errors import AttackFailed, SqbaError
from .harness import ExperimentSpec, emit_report, prepare_eval_set, run_experiment
from .io import load_dataset, load_model, save_dataset, save_model
from .nn import ARCHITECTURES
from .oracle import HardLabelOracle
from .sqba import SqbaConfig, rho, sqba_attack
from .surrogate import angle_profile
from .train import TrainConfig, train


def _write_rows(path, columns, rows):
    fh = open(path, "w", newline="", encoding="utf-8") if path != "-" else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format(r[c], ".10g") if isinstance(r[c], float) else r[c] for c in columns])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_data(args):
    if args.name == "shapes":
        ds = datasets.shapes(args.count, seed=args.seed)
    elif args.name == "digits":
        ds = datasets.digits()
    else:
        ds = datasets.synthetic(args.count, seed=args.seed)
    train_ds, test_ds = ds.split(args.test_fraction, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(train_ds, out / "train.bin")
    save_dataset(test_ds, out / "test.bin")
    print(f"wrote {len(train_ds)} train / {len(test_ds)} test examples to {out}")


def cmd_train(args):
    tr = load_dataset(args.dataset)
    te = load_dataset(args.test) if args.test else None
    net = ARCHITECTURES[args.arch](tr.shape, tr.num_classes, seed=args.seed)
    net.name = args.arch
    net.data_range = tuple(tr.data_range)
    cfg = TrainConfig(args.epochs, args.batch_size, args.lr, args.optimizer, args.seed)
    train(net, tr.images, tr.labels, cfg, eval_set=(te.images, te.labels) if te else None)
    save_model(net, args.out)
    msg = f"{args.arch}: train acc {net.meta['train_acc']:.4f}"
    if te:
        msg += f", test acc {net.meta['test_acc']:.4f}"
    print(msg)


def cmd_attack(args):
    target = load_model(args.target)
    surrogate = load_model(args.surrogate) if args.surrogate else None
    if args.method == "sqba" and surrogate is None:
        raise SqbaError("--method sqba needs --surrogate")
    ds = load_dataset(args.dataset)
    subset, idx = prepare_eval_set(target, ds, args.n, args.seed)
    rows = []
    for x, c, ex in zip(subset.images, subset.labels, idx):
        oracle = HardLabelOracle(target, int(c), args.budget)
        seed = args.seed * 1_000_003 + int(ex)
        if args.method == "sqba":
            res = sqba_attack(surrogate, oracle, x, int(c), SqbaConfig(args.budget, args.rho, seed=seed))
        else:
            res = hsja_attack(oracle, x, int(c), HsjaConfig(args.budget, args.rho, seed=seed))
        rows.append({"example": int(ex), "true_class": int(c), "success": int(res.success),
                     "queries_used": res.queries_used, "final_rho": float(res.final_rho),
                     "iterations": res.iterations, "first_success_query": res.first_success_query(args.rho) or ""})
    _write_rows(args.out, list(rows[0]) if rows else ["example"], rows)
    asr = 100.0 * np.mean([r["success"] for r in rows]) if rows else 0.0
    print(f"{args.method}: ASR {asr:.1f}% over {len(rows)} examples", file=sys.stderr)


def cmd_sweep(args):
    spec = ExperimentSpec.from_json(args.config)
    if args.workers:
        spec.workers = args.workers
    table, records = run_experiment(spec)
    paths = emit_report(table, records, args.out)
    for row in table.to_rows():
        print(f"{row['method']:5s} {row['surrogate']:12s} {row['budget']:5d}  ASR {row['asr']:5.1f}%")
    print(f"reports: {', '.join(str(p) for p in paths.values())}", file=sys.stderr)


def cmd_angles(args):
    nets = [load_model(p) for p in args.surrogate]
    ds = load_dataset(args.dataset)
    subset, _ = prepare_eval_set(nets[0], ds, min(args.n, len(ds)) if args.n else len(ds), args.seed)
    grid = [float(e) for e in args.eta.split(",")] if args.eta else []
    rows = angle_profile(nets, subset.images, subset.labels, grid)
    _write_rows(args.out, ["eta", "mean_cos_angle", "std", "n_examples"], rows)


def cmd_dgm(args):
    net = load_model(args.model)
    ds = load_dataset(args.dataset)
    subset, idx = prepare_eval_set(net, ds, args.n, args.seed)
    cfg = DgmConfig(step=args.step, norm_mode=args.norm)
    rows = []
    for x, c, ex in zip(subset.images, subset.labels, idx):
        try:
            adv = dgm_attack(net, x, int(c), cfg, tune=not args.no_tune)
            rows.append({"example": int(ex), "true_class": int(c), "adv_class": int(net.predict(adv)),
                         "success": 1, "rho": rho(x, adv)})
        except AttackFailed:
            rows.append({"example": int(ex), "true_class": int(c), "adv_class": int(c), "success": 0, "rho": float("nan")})
    _write_rows(args.out, ["example", "true_class", "adv_class", "success", "rho"], rows)


def build_parser():
    p = argparse.ArgumentParser(prog="sqba", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("data", help="generate a built-in dataset as train/test files")
    d.add_argument("name", choices=["shapes", "digits", "synthetic"])
    d.add_argument("--count", type=int, default=4000)
    d.add_argument("--test-fraction", type=float, default=0.25)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_data)

    t = sub.add_parser("train", help="train a classifier")
    t.add_argument("--arch", choices=sorted(ARCHITECTURES), required=True)
    t.add_argument("--dataset", required=True)
    t.add_argument("--test")
    t.add_argument("--epochs", type=int, default=15)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--lr", type=float, default=2e-3)
    t.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("attack", help="hard-label attack on a target model")
    a.add_argument("--target", required=True)
    a.add_argument("--surrogate")
    a.add_argument("--dataset", required=True)
    a.add_argument("--budget", type=int, default=1000)
    a.add_argument("--rho", type=float, default=0.1)
    a.add_argument("--method", choices=["sqba", "hsja"], default="sqba")
    a.add_argument("--n", type=int, default=20)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", default="-")
    a.set_defaults(func=cmd_attack)

    s = sub.add_parser("sweep", help="run a budget sweep from a JSON experiment file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=0)
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("angles", help="surrogate gradient angle profile")
    g.add_argument("--surrogate", nargs="+", required=True)
    g.add_argument("--dataset", required=True)
    g.add_argument("--eta", default="0.01,0.02,0.05,0.1,0.15,0.2,0.3,0.4,0.5,0.6,0.8,1.0")
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_angles)

    w = sub.add_parser("dgm", help="white-box dual-gradient attack")
    w.add_argument("--model", required=True)
    w.add_argument("--dataset", required=True)
    w.add_argument("--n", type=int, default=20)
    w.add_argument("--step", type=float, default=0.02)
    w.add_argument("--norm", choices=["l2", "linf"], default="linf")
    w.add_argument("--no-tune", action="store_true")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", default="-")
    w.set_defaults(func=cmd_dgm)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except (SqbaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
