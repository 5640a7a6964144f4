"""Command-line front end: one subcommand per workflow, reproducible runs.

Every command writes its outputs into ``--out DIR`` together with a
``manifest.json`` recording the command, the full flag set, the resolved
seed, sha256 hashes of every input file, the tool version, and the wall
clock.  All randomness flows from ``--seed`` (default: the ``DCG_SEED``
environment variable, else 0), so reruns are byte-identical apart from
the manifest's wall-clock entry.

Exit codes: 0 success, 2 bad flags or flag values, 3 unreadable or
malformed input files, 4 numeric failure (non-finite training loss,
implausible evidence, ...).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import autodiff as ad
from . import fairness as fr
from .data import (DataError, SalaryGenConfig, dataset_rows, gen_salary,
                   load_csv)
from .data import GraphSpec
from .graph import GraphError, InferenceConfig, expectation_under
from .training import (TrainConfig, TrainError, cross_validate, evaluate_nll,
                       fit, load_checkpoint, save_checkpoint, warm_start)
from .units import UnitError

NUMERIC_ERRORS = (TrainError, GraphError, ad.DomainError, UnitError,
                  fr.FairnessError)


class CliError(Exception):
    """Abort the command with a specific exit code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ----------------------------------------------------------------- helpers


def resolve_seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("DCG_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(2, f"DCG_SEED must be an integer, got {env!r}") from None


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def write_json(path, doc: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_csv(path, header: list[str], columns: list):
    """Write aligned columns; floats via repr so values round-trip."""
    n = len(columns[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for i in range(n):
            row = []
            for c in columns:
                v = c[i]
                if isinstance(v, (int, np.integer)):
                    row.append(str(int(v)))
                else:
                    row.append(repr(float(v)))
            out.writerow(row)


def write_manifest(args, seed: int, inputs: list, t0: float):
    flags = {}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        if v is None or isinstance(v, (str, int, float, bool)):
            flags[k] = v
        elif isinstance(v, (list, tuple)):
            flags[k] = list(v)
        else:
            flags[k] = str(v)
    write_json(os.path.join(args.out, "manifest.json"), {
        "command": args.command,
        "flags": flags,
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "version": __version__,
        "wall_clock_s": round(time.time() - t0, 3)})


def load_data(path):
    try:
        return load_csv(path)
    except (OSError, DataError) as err:
        raise CliError(3, str(err)) from err


def load_spec(path) -> GraphSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            return GraphSpec.from_json(fh.read())
    except (OSError, DataError) as err:
        raise CliError(3, f"{path}: {err}") from err


def load_graph(path):
    try:
        return load_checkpoint(path)
    except (OSError, TrainError) as err:
        raise CliError(3, str(err)) from err


def load_predictor(path):
    try:
        return fr.load_predictor(path)
    except (OSError, fr.FairnessError) as err:
        raise CliError(3, str(err)) from err


def graph_rows(graph, dataset, path):
    rows = dataset_rows(dataset)
    missing = [n for n in graph.node_names if n not in rows]
    if missing:
        raise CliError(3, f"{path}: missing columns {missing}")
    return {n: rows[n] for n in graph.node_names}


def parse_do(pairs, graph) -> dict[str, float]:
    out = {}
    for expr in pairs or []:
        name, sep, val = expr.partition("=")
        if not sep or not name:
            raise CliError(2, f"bad do-expression {expr!r} (want name=value)")
        try:
            v = float(val)
        except ValueError:
            raise CliError(2, f"bad do-expression {expr!r}: "
                              f"{val!r} is not a number") from None
        if name not in graph.node_names:
            raise CliError(2, f"unknown node {name!r}")
        out[name] = v
    return out


def check_node(graph, name, flag):
    if name not in graph.node_names:
        raise CliError(2, f"{flag}: unknown node {name!r}")


def train_config(args, seed: int) -> TrainConfig:
    try:
        return TrainConfig(epochs=args.epochs, batch_size=args.batch,
                           lr=args.lr, m=args.m, seed=seed,
                           patience=args.patience)
    except TrainError as err:
        raise CliError(2, str(err)) from err


def mean_ci(values: np.ndarray):
    """Normal-approximation 95% interval for the mean."""
    n = values.size
    mean = float(values.mean())
    if n < 2:
        return mean, mean, mean
    half = 1.96 * float(values.std(ddof=1)) / np.sqrt(n)
    return mean, mean - half, mean + half


# ---------------------------------------------------------------- commands


def cmd_gen_salary(args):
    t0 = time.time()
    seed = resolve_seed(args)
    if args.n < 1:
        raise CliError(2, "--n must be at least 1")
    if args.beta is not None and args.beta < 0:
        raise CliError(2, "--beta must be non-negative")
    kwargs = {} if args.beta is None else {"beta": args.beta}
    dataset, spec = gen_salary(SalaryGenConfig(n=args.n, seed=seed, **kwargs))
    out = out_dir(args)
    dataset.to_csv(os.path.join(out, "salary.csv"))
    with open(os.path.join(out, "graph-spec.json"), "w",
              encoding="utf-8") as fh:
        fh.write(spec.to_json())
        fh.write("\n")
    write_manifest(args, seed, [], t0)


def cmd_fit(args):
    t0 = time.time()
    seed = resolve_seed(args)
    spec = load_spec(args.graph)
    cfg = train_config(args, seed)
    try:
        graph = spec.build().init_params(seed)
    except (DataError, UnitError) as err:
        raise CliError(3, f"{args.graph}: {err}") from err
    rows = graph_rows(graph, load_data(args.data), args.data)
    try:
        warm_start(graph, rows)
        curve = fit(graph, rows, cfg)
    except UnitError as err:
        raise CliError(3, f"{args.data}: {err}") from err
    except NUMERIC_ERRORS as err:
        raise CliError(4, str(err)) from err
    out = out_dir(args)
    save_checkpoint(os.path.join(out, "checkpoint.json"), graph, spec, cfg)
    write_csv(os.path.join(out, "curve.csv"), ["epoch", "nll"],
              [np.arange(len(curve)), np.asarray(curve)])
    write_manifest(args, seed, [args.graph, args.data], t0)


def cmd_eval(args):
    t0 = time.time()
    seed = resolve_seed(args)
    if bool(args.checkpoint) == bool(args.graph):
        raise CliError(2, "give exactly one of --checkpoint or --graph")
    out = out_dir(args)
    if args.checkpoint:
        graph, _ = load_graph(args.checkpoint)
        rows = graph_rows(graph, load_data(args.data), args.data)
        try:
            nll = evaluate_nll(graph, rows, m=args.m, seed=seed)
        except NUMERIC_ERRORS as err:
            raise CliError(4, str(err)) from err
        write_csv(os.path.join(out, "nll.csv"), ["nll"], [np.array([nll])])
        inputs = [args.checkpoint, args.data]
    else:
        if args.folds < 2:
            raise CliError(2, "--folds must be at least 2")
        spec = load_spec(args.graph)
        cfg = train_config(args, seed)
        try:
            graph = spec.build()
        except (DataError, UnitError) as err:
            raise CliError(3, f"{args.graph}: {err}") from err
        rows = graph_rows(graph, load_data(args.data), args.data)
        try:
            nlls = cross_validate(spec, rows, folds=args.folds, config=cfg,
                                  eval_m=args.eval_m)
        except UnitError as err:
            raise CliError(3, f"{args.data}: {err}") from err
        except NUMERIC_ERRORS as err:
            raise CliError(4, str(err)) from err
        write_csv(os.path.join(out, "folds.csv"), ["fold", "nll"],
                  [np.arange(len(nlls)), np.asarray(nlls)])
        inputs = [args.graph, args.data]
    write_manifest(args, seed, inputs, t0)


def cmd_intervene(args):
    t0 = time.time()
    seed = resolve_seed(args)
    if args.n < 1:
        raise CliError(2, "--n must be at least 1")
    graph, _ = load_graph(args.checkpoint)
    do = parse_do(args.do, graph)
    out = out_dir(args)
    inputs = [args.checkpoint]

    if args.quantile_sweep is None:
        try:
            cols = graph.sample(args.n, do, seed=seed)
        except NUMERIC_ERRORS as err:
            raise CliError(4, str(err)) from err
        write_csv(os.path.join(out, "samples.csv"), list(graph.node_names),
                  [cols[k] for k in graph.node_names])
        write_manifest(args, seed, inputs, t0)
        return

    node, lo, hi, steps = args.quantile_sweep
    check_node(graph, node, "--quantile-sweep")
    try:
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise CliError(2, "--quantile-sweep wants NODE LO HI STEPS") from None
    if not (0.0 <= lo < hi <= 1.0) or steps < 2:
        raise CliError(2, "--quantile-sweep needs 0 <= LO < HI <= 1 and "
                          "STEPS >= 2")
    if not args.data:
        raise CliError(2, "sweep mode needs --data for empirical quantiles")
    if not args.target:
        raise CliError(2, "sweep mode needs --target")
    check_node(graph, args.target, "--target")
    rows = graph_rows(graph, load_data(args.data), args.data)
    inputs.append(args.data)
    values = rows[node]
    levels = np.linspace(lo, hi, steps)
    half = 0.5 * (hi - lo) / (steps - 1)
    grid = {"quantile": [], "value": [], "mean": [], "ci_lo": [], "ci_hi": [],
            "obs_mean": [], "obs_ci_lo": [], "obs_ci_hi": []}
    try:
        for i, q in enumerate(levels):
            v = float(np.quantile(values, q))
            iv = dict(do)
            iv[node] = v
            sampled = graph.sample(args.n, iv, seed=seed + i)
            mean, ci_lo, ci_hi = mean_ci(sampled[args.target])
            b_lo = float(np.quantile(values, max(0.0, q - half)))
            b_hi = float(np.quantile(values, min(1.0, q + half)))
            in_bin = rows[args.target][(values >= b_lo) & (values <= b_hi)]
            if in_bin.size == 0:
                o_mean = o_lo = o_hi = float("nan")
            else:
                o_mean, o_lo, o_hi = mean_ci(in_bin)
            for key, val in zip(grid, (q, v, mean, ci_lo, ci_hi,
                                       o_mean, o_lo, o_hi)):
                grid[key].append(val)
    except NUMERIC_ERRORS as err:
        raise CliError(4, str(err)) from err
    write_csv(os.path.join(out, "sweep.csv"), list(grid),
              [np.asarray(v) for v in grid.values()])
    write_manifest(args, seed, inputs, t0)


def cmd_counterfactual(args):
    t0 = time.time()
    seed = resolve_seed(args)
    graph, _ = load_graph(args.checkpoint)
    dataset = load_data(args.data)
    if not 0 <= args.row < dataset.n:
        raise CliError(2, f"--row {args.row} out of range "
                          f"(data has {dataset.n} rows)")
    do = parse_do(args.do, graph)
    if not do:
        raise CliError(2, "counterfactual needs at least one --do")
    predictor = load_predictor(args.predictor) if args.predictor else None
    rows = graph_rows(graph, dataset, args.data)
    evidence = {k: float(rows[k][args.row]) for k in graph.node_names}
    config = InferenceConfig(m=args.m, n=args.n, seed=seed)
    try:
        cf = graph.counterfactual(evidence, do, config)
    except NUMERIC_ERRORS as err:
        raise CliError(4, str(err)) from err

    out = out_dir(args)
    names = list(graph.node_names)
    write_csv(os.path.join(out, "counterfactual.csv"), names + ["weight"],
              [cf.columns[k] for k in names] + [cf.weights])
    summary = {
        "row": args.row,
        "intervention": do,
        "factual": evidence,
        "counterfactual_means": {
            k: expectation_under(cf, lambda cols, key=k: cols[key])
            for k in names},
        "weights_sum": float(cf.weights.sum()),
        "n": config.n,
        "m": config.m,
    }
    if predictor is not None:
        one = {k: np.array([v]) for k, v in evidence.items()}
        summary["factual_prediction"] = float(predictor.predict(one)[0])
        summary["counterfactual_prediction"] = expectation_under(
            cf, predictor.predict)
    write_json(os.path.join(out, "summary.json"), summary)
    inputs = [args.checkpoint, args.data]
    if args.predictor:
        inputs.append(args.predictor)
    write_manifest(args, seed, inputs, t0)


def cmd_fairness(args):
    t0 = time.time()
    seed = resolve_seed(args)
    graph, _ = load_graph(args.checkpoint)
    dataset = load_data(args.data)
    rows = graph_rows(graph, dataset, args.data)
    check_node(graph, args.protected, "--protected")
    check_node(graph, args.target, "--target")
    if args.protected == args.target:
        raise CliError(2, "--protected and --target must differ")
    prot = graph.by_name[args.protected]
    if not prot.discrete or getattr(prot, "n_classes", 2) != 2:
        raise CliError(2, f"--protected {args.protected!r} must be a binary "
                          "node (complement policy)")
    config = InferenceConfig(m=args.m, n=args.n, seed=seed)
    out = out_dir(args)
    inputs = [args.checkpoint, args.data]

    if args.mode == "audit":
        if bool(args.predictor) == bool(args.black_box_batch):
            raise CliError(2, "audit needs exactly one of --predictor or "
                              "--black-box-batch")
        if args.black_box_batch:
            bdir = args.black_box_batch
            os.makedirs(bdir, exist_ok=True)
            inputs_path = os.path.join(bdir, "cf-inputs.csv")
            preds_path = os.path.join(bdir, "cf-preds.csv")
            if not os.path.exists(preds_path):
                try:
                    n, total = fr.write_cf_inputs(inputs_path, graph, rows,
                                                  args.protected, config)
                except NUMERIC_ERRORS as err:
                    raise CliError(4, str(err)) from err
                write_json(os.path.join(out, "report.json"), {
                    "mode": "audit", "black_box": True,
                    "status": "awaiting-predictions",
                    "inputs": inputs_path, "expected": preds_path,
                    "n_rows": n, "cf_per_row": total})
                write_manifest(args, seed, inputs, t0)
                print(f"wrote {inputs_path}; score it into {preds_path} "
                      "and rerun", file=sys.stderr)
                return
            try:
                y, yp = fr.black_box_join(inputs_path, preds_path)
            except fr.FairnessError as err:
                raise CliError(3, str(err)) from err
            try:
                spearman = fr.spearman_by_group(y, rows[args.target],
                                                rows[args.protected])
            except fr.FairnessError as err:
                raise CliError(4, str(err)) from err
            cu = {str(k): float(np.mean(np.abs(yp - y) ** k))
                  for k in (1, 2)}
            write_json(os.path.join(out, "report.json"), {
                "mode": "audit", "black_box": True,
                "protected": args.protected, "n_rows": int(y.size),
                "cu": cu, "spearman": spearman})
            inputs += [inputs_path, preds_path]
            write_manifest(args, seed, inputs, t0)
            return
        predictor = load_predictor(args.predictor)
        try:
            report = fr.audit(graph, predictor, rows, args.target,
                              args.protected, config=config)
        except NUMERIC_ERRORS as err:
            raise CliError(4, str(err)) from err
        write_json(os.path.join(out, "report.json"),
                   {"mode": "audit", "black_box": False,
                    "report": report.to_dict()})
        inputs.append(args.predictor)
        write_manifest(args, seed, inputs, t0)
        return

    # train mode
    if args.lam < 0:
        raise CliError(2, "--lambda must be non-negative")
    if args.features:
        features = [f for f in args.features.split(",") if f]
        for f in features:
            check_node(graph, f, "--features")
        if args.target in features:
            raise CliError(2, "--features must not contain the target")
    else:
        features = [n for n in graph.node_names if n != args.target]
    try:
        hidden = tuple(int(h) for h in args.hidden.split(",") if h)
    except ValueError:
        raise CliError(2, f"--hidden wants a comma list of ints, "
                          f"got {args.hidden!r}") from None
    cfg = train_config(args, seed)
    cf_cfg = InferenceConfig(m=args.m, n=fr.N_CF_DEFAULT, seed=seed)
    reports = {}
    fair = None
    try:
        for lam in (0.0, args.lam):
            predictor = fr.MLPPredictor(tuple(features),
                                        hidden).init_params(seed)
            fair, rep = fr.train_fair(graph, predictor, rows, args.target,
                                      args.protected, lam, config=cfg,
                                      cf_config=cf_cfg,
                                      holdout=args.holdout)
            reports[lam] = rep
    except NUMERIC_ERRORS as err:
        raise CliError(4, str(err)) from err
    before, after = reports[0.0], reports[args.lam]
    reduction = None
    if before.cu[1] > 0:
        reduction = 1.0 - after.cu[1] / before.cu[1]
    fr.save_predictor(os.path.join(out, "predictor.json"), fair)
    write_json(os.path.join(out, "report.json"),
               {"mode": "train", "lambda": args.lam,
                "before": before.to_dict(), "after": after.to_dict(),
                "cu1_reduction": reduction})
    write_manifest(args, seed, inputs, t0)


def cmd_sanity(args):
    t0 = time.time()
    seed = resolve_seed(args)
    graph, _ = load_graph(args.checkpoint)
    check_node(graph, args.node, "--node")
    check_node(graph, args.condition_on, "--condition-on")
    try:
        grid = [float(v) for v in args.grid.split(",") if v]
    except ValueError:
        raise CliError(2, f"--grid wants a comma list of numbers, "
                          f"got {args.grid!r}") from None
    if not grid:
        raise CliError(2, "--grid is empty")
    if args.points < 2 or args.samples < 2:
        raise CliError(2, "--points and --samples must be at least 2")

    unit = graph.by_name[args.node]
    sampled = {}
    try:
        for j, v in enumerate(grid):
            cols, noise = graph.sample(args.samples, {args.condition_on: v},
                                       seed=seed + j, return_noise=True)
            for cname in graph.confounder_names:
                cols[cname] = noise[cname]
            sampled[v] = cols
    except NUMERIC_ERRORS as err:
        raise CliError(4, str(err)) from err

    if unit.discrete:
        k = getattr(unit, "n_classes", 2)
        xgrid = np.arange(k, dtype=np.float64)
    else:
        allv = np.concatenate([sampled[v][args.node] for v in grid])
        pad = 0.25 * (allv.max() - allv.min()) + 1e-6
        xgrid = np.linspace(allv.min() - pad, allv.max() + pad, args.points)

    cols = {"ancestor_value": [], "x": [], "p": []}
    try:
        for v in grid:
            if unit.parent_names:
                parents = np.stack([sampled[v][p] for p in unit.parent_names],
                                   axis=1)
            else:
                parents = np.zeros((args.samples, 0))
            rep = np.repeat(parents, xgrid.size, axis=0)
            vals = np.tile(xgrid, args.samples)
            ll = unit.loglk(ad.EvalContext(graph.store), rep, vals)
            dens = np.exp(np.asarray(ll)).reshape(args.samples, xgrid.size)
            p = dens.mean(axis=0)
            cols["ancestor_value"] += [v] * xgrid.size
            cols["x"] += list(xgrid)
            cols["p"] += list(p)
    except NUMERIC_ERRORS as err:
        raise CliError(4, str(err)) from err
    write_csv(os.path.join(out_dir(args), "curves.csv"), list(cols),
              [np.asarray(c) for c in cols.values()])
    write_manifest(args, seed, [args.checkpoint], t0)


# ------------------------------------------------------------------ parser


def add_train_flags(p):
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--m", type=int, default=100,
                   help="confounder draws per row")
    p.add_argument("--patience", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dcg",
        description="Neural structural causal models: fit, sample, "
                    "intervene, explain, audit.")
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None,
                        help="default: DCG_SEED env var, else 0")
        sp.add_argument("--out", required=True, help="output directory")

    g = sub.add_parser("gen-salary", help="generate the synthetic salary "
                                          "table and its graph spec")
    g.add_argument("--n", type=int, default=5000)
    g.add_argument("--beta", type=float, default=None)
    common(g)
    g.set_defaults(func=cmd_gen_salary)

    f = sub.add_parser("fit", help="train a graph on CSV data")
    f.add_argument("--graph", required=True, help="graph-spec JSON")
    f.add_argument("--data", required=True, help="training CSV")
    add_train_flags(f)
    common(f)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="held-out nll, or k-fold cross "
                                    "validation with --graph/--folds")
    e.add_argument("--checkpoint", help="trained-graph checkpoint")
    e.add_argument("--graph", help="graph-spec JSON (cross-validation mode)")
    e.add_argument("--data", required=True)
    e.add_argument("--folds", type=int, default=10)
    e.add_argument("--eval-m", type=int, default=1000,
                   help="confounder draws per row at evaluation")
    add_train_flags(e)
    common(e)
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("intervene", help="sample under interventions, or "
                                         "sweep a node across its quantiles")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--do", action="append", metavar="NODE=VALUE")
    i.add_argument("--n", type=int, default=1000, help="samples per draw")
    i.add_argument("--quantile-sweep", nargs=4, default=None,
                   metavar=("NODE", "LO", "HI", "STEPS"))
    i.add_argument("--target", help="node averaged in sweep mode")
    i.add_argument("--data", help="CSV for quantiles and the "
                                  "observational curve (sweep mode)")
    common(i)
    i.set_defaults(func=cmd_intervene)

    c = sub.add_parser("counterfactual", help="counterfactual set for one "
                                              "data row under --do")
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--row", type=int, required=True)
    c.add_argument("--do", action="append", metavar="NODE=VALUE")
    c.add_argument("--n", type=int, default=100,
                   help="counterfactual draws")
    c.add_argument("--m", type=int, default=100,
                   help="confounder draws for abduction weights")
    c.add_argument("--predictor", help="predictor checkpoint for "
                                       "prediction deltas")
    common(c)
    c.set_defaults(func=cmd_counterfactual)

    a = sub.add_parser("fairness", help="audit or train a predictor for "
                                        "counterfactual fairness")
    a.add_argument("mode", choices=("audit", "train"))
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--protected", required=True)
    a.add_argument("--target", required=True)
    a.add_argument("--predictor", help="predictor checkpoint (audit)")
    a.add_argument("--black-box-batch", metavar="DIR",
                   help="two-phase external-predictor protocol directory")
    a.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="CU_2 regularization weight (train)")
    a.add_argument("--features", help="comma list of predictor features "
                                      "(train; default: all but target)")
    a.add_argument("--hidden", default="32,32",
                   help="comma list of hidden layer widths (train)")
    a.add_argument("--holdout", type=float, default=0.2)
    a.add_argument("--n", type=int, default=100,
                   help="counterfactual draws per row (audit)")
    add_train_flags(a)
    common(a)
    a.set_defaults(func=cmd_fairness)

    s = sub.add_parser("sanity", help="density curves of a node under "
                                      "interventions on another")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--node", required=True)
    s.add_argument("--condition-on", required=True, metavar="NODE")
    s.add_argument("--grid", required=True, metavar="V1,V2,...")
    s.add_argument("--points", type=int, default=200,
                   help="value-grid resolution")
    s.add_argument("--samples", type=int, default=500,
                   help="parent draws per curve")
    common(s)
    s.set_defaults(func=cmd_sanity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as err:
        print(f"dcg: {err}", file=sys.stderr)
        return err.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
