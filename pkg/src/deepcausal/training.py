"""Joint maximum-likelihood training, k-fold evaluation, checkpointing.

All units in a graph train simultaneously against the graph log-density
(with confounders integrated out by fresh Monte-Carlo draws per batch).
Warm start fits per-node normalizers from data statistics so every
continuous unit begins at a standard-normal base on its own scale.

Checkpoints are versioned JSON ("dcg-ckpt/1") holding the graph spec,
its hash, every parameter vector, and the normalizer statistics; floats
round-trip exactly, so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import TapeContext
from .data import DataError, GraphSpec
from .graph import CausalGraph
from .units import Normalizer, UnitError

Array = np.ndarray

CKPT_VERSION = "dcg-ckpt/1"


class TrainError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 128
    lr: float = 1e-3
    m: int = 100
    seed: int = 0
    grad_clip: float = 10.0
    patience: int | None = None

    def __post_init__(self):
        if (self.epochs < 0 or self.batch_size < 1 or self.lr <= 0
                or self.m < 1 or self.grad_clip <= 0):
            raise TrainError("invalid training configuration")


def warm_start(graph: CausalGraph, rows: dict[str, Array]) -> dict[str, Normalizer]:
    """Fit normalizers from column statistics and install parent scalings.

    Continuous nodes get (mean, population std) of their column; their
    loglk picks up the change-of-variables correction automatically.
    Discrete nodes are left untouched.  Every unit's parent inputs are
    centred/scaled by the parents' column statistics (confounder parents
    keep the standard-normal prior scale).
    """
    fitted = {}
    stats_cache = {}
    for name in graph.node_names:
        col = np.asarray(rows[name], dtype=np.float64)
        unit = graph.by_name[name]
        if not unit.discrete:
            unit.normalizer = Normalizer.fit(col, name=name)
            fitted[name] = unit.normalizer
        s = float(col.std())
        stats_cache[name] = (float(col.mean()), s if s > 0 else 1.0)
    for cname in graph.confounder_names:
        stats_cache[cname] = (0.0, 1.0)
    for name in graph.order:
        unit = graph.by_name[name]
        if unit.parent_names:
            loc = np.array([stats_cache[p][0] for p in unit.parent_names])
            scale = np.array([stats_cache[p][1] for p in unit.parent_names])
            unit.set_parent_stats(loc, scale)
    return fitted


def _epoch_batches(n: int, batch_size: int, rng) -> list[Array]:
    idx = rng.permutation(n)
    return [idx[i:i + batch_size] for i in range(0, n, batch_size)]


def fit(graph: CausalGraph, rows: dict[str, Array],
        config: TrainConfig = TrainConfig()) -> list[float]:
    """Minibatch Adam on mean negative graph log-density.

    Returns the per-epoch mean training nll.  A non-finite loss aborts
    with the previous epoch's parameters restored.
    """
    n = next(np.asarray(v).shape[0] for v in rows.values())
    cols = {k: np.asarray(rows[k], dtype=np.float64) for k in graph.node_names}
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    curve: list[float] = []
    last_good = graph.store.state_dict()
    best = np.inf
    since_best = 0
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for b, idx in enumerate(_epoch_batches(n, config.batch_size, rng)):
            batch = {k: v[idx] for k, v in cols.items()}
            u = None
            if graph.confounder_names:
                u = graph.confounder_draws(idx.size, config.m, rng)
            try:
                tape = ad.Tape()
                ll = graph.loglk_given_u(TapeContext(tape, graph.store),
                                         batch, u)
                loss = -ad.vmean(ll)
                loss_value = float(loss.value)
                bad = not np.isfinite(loss_value)
                if not bad:
                    grads = tape.backward(loss)
                    ad.clip_grad_norm(grads, config.grad_clip)
                    ad.adam_step(graph.store, grads, lr=config.lr)
                tape.release()
            except (ad.DomainError, UnitError) as err:
                graph.store.load_state_dict(last_good)
                raise TrainError(f"non-finite loss at epoch {epoch}, "
                                 f"batch {b}: {err}; "
                                 "parameters restored") from err
            if bad:
                graph.store.load_state_dict(last_good)
                raise TrainError(f"non-finite loss at epoch {epoch}, "
                                 f"batch {b}; parameters restored")
            total += loss_value * idx.size
            count += idx.size
        curve.append(total / count)
        last_good = graph.store.state_dict()
        if config.patience is not None:
            if curve[-1] < best - 1e-6:
                best, since_best = curve[-1], 0
            else:
                since_best += 1
                if since_best > config.patience:
                    break
    return curve


def evaluate_nll(graph: CausalGraph, rows: dict[str, Array],
                 m: int = 100, seed: int = 0) -> float:
    """Mean negative log-density of the rows under the graph."""
    return float(-np.mean(graph.loglk(rows, m=m, seed=seed)))


def kfold_indices(n: int, folds: int, rng) -> list[Array]:
    idx = rng.permutation(n)
    return [idx[f::folds] for f in range(folds)]


def cross_validate(spec: GraphSpec, rows: dict[str, Array], folds: int = 10,
                   config: TrainConfig = TrainConfig(),
                   eval_m: int = 1000) -> list[float]:
    """Per-fold held-out mean nll: fresh graph per fold, deterministic split."""
    n = next(np.asarray(v).shape[0] for v in rows.values())
    if n < folds:
        raise TrainError(f"need at least {folds} rows for {folds} folds")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    parts = kfold_indices(n, folds, rng)
    out = []
    for f, test_idx in enumerate(parts):
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        train = {k: np.asarray(v)[train_mask] for k, v in rows.items()}
        test = {k: np.asarray(v)[test_idx] for k, v in rows.items()}
        cfg = config
        if int(train_mask.sum()) < config.batch_size:
            warnings.warn("fold smaller than batch size; shrinking batch")
            cfg = replace(config, batch_size=max(1, int(train_mask.sum())))
        graph = spec.build().init_params(config.seed + f)
        warm_start(graph, train)
        fit(graph, train, cfg)
        out.append(evaluate_nll(graph, test, m=eval_m, seed=config.seed))
    return out


# ------------------------------------------------------------ checkpoints


def checkpoint_dict(graph: CausalGraph, spec: GraphSpec,
                    train_config: TrainConfig | None = None) -> dict:
    params = {name: graph.store[name].tolist()
              for name in sorted(graph.store.names())}
    normalizers = {}
    parent_stats = {}
    for name in graph.node_names:
        unit = graph.by_name[name]
        if not unit.discrete:
            normalizers[name] = {"m": unit.normalizer.m, "s": unit.normalizer.s}
        if unit.parent_names:
            parent_stats[name] = {"loc": unit.parent_loc.tolist(),
                                  "scale": unit.parent_scale.tolist()}
    return {"version": CKPT_VERSION,
            "kind": "graph",
            "spec": spec.to_dict(),
            "spec_hash": spec.hash(),
            "params": params,
            "normalizers": normalizers,
            "parent_stats": parent_stats,
            "train_config": asdict(train_config) if train_config else None}


def save_checkpoint(path, graph: CausalGraph, spec: GraphSpec,
                    train_config: TrainConfig | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(graph, spec, train_config), fh,
                  sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[CausalGraph, GraphSpec]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as err:
        raise TrainError(f"malformed checkpoint {path}: {err}") from None
    if not isinstance(doc, dict) or doc.get("version") != CKPT_VERSION:
        raise TrainError(f"unsupported checkpoint version in {path}: "
                         f"{doc.get('version') if isinstance(doc, dict) else doc!r}")
    try:
        spec = GraphSpec.from_dict(doc["spec"])
        if spec.hash() != doc["spec_hash"]:
            raise TrainError(f"checkpoint {path}: graph-spec hash mismatch")
        graph = spec.build().init_params(spec.seed)
        expected = set(graph.store.names())
        if set(doc["params"]) != expected:
            raise TrainError(f"checkpoint {path}: parameter set mismatch")
        for name, value in doc["params"].items():
            # assignment into initialized parameters enforces exact shapes
            graph.store[name] = np.asarray(value, dtype=np.float64)
        for name, nz in doc["normalizers"].items():
            graph.by_name[name].normalizer = Normalizer(m=nz["m"], s=nz["s"])
        for name, ps in doc["parent_stats"].items():
            graph.by_name[name].set_parent_stats(
                np.asarray(ps["loc"], dtype=np.float64),
                np.asarray(ps["scale"], dtype=np.float64))
    except (KeyError, TypeError, DataError, UnitError, ad.AutodiffError) as err:
        raise TrainError(f"malformed checkpoint {path}: {err}") from err
    return graph, spec
