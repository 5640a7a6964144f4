"""Counterfactual fairness: audit metrics, regularized training, explanations.

A predictor is audited by asking, for each individual, what it would have
predicted had a protected attribute been different while everything else
about that individual (their exogenous noise and any latent confounders)
stayed fixed.  Y is the factual prediction; Y' is the expectation of the
prediction over the individual's counterfactual rows.  The degree-k
unfairness CU_k is the mean of |Y' - Y|^k over the audited rows, in the
predictor's output units.

The same quantity, computed with squared gaps on the predictor's
standardized output scale, serves as a differentiable regularizer so a
trainable predictor can be fit to be fair by construction.

External black boxes are audited through a file protocol: we emit every
factual and counterfactual feature row to ``cf-inputs.csv``, the external
tool scores them into ``cf-preds.csv``, and the join reproduces CU_k.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import autodiff as ad
from .autodiff import EvalContext, MLPSpec, ParamStore, TapeContext, value_of
from .graph import (Array, CausalGraph, CounterfactualSet, GraphError,
                    InferenceConfig, expectation_under)
from .training import CKPT_VERSION, TrainConfig, TrainError, _epoch_batches

# counterfactual draws per training row for the CU_2 regularizer
N_CF_DEFAULT = 5


class FairnessError(ValueError):
    """Invalid audit setup or protocol file."""


# -------------------------------------------------------------- predictors


class Predictor:
    """Pure function of an ordered subset of graph columns.

    Subclasses implement ``predict`` (vectorized over rows).  Trainable
    predictors additionally set ``trainable = True`` and expose their
    parameters through an autodiff ``store``.
    """

    trainable = False
    feature_names: tuple[str, ...] = ()

    def feature_matrix(self, columns: dict[str, Array]) -> np.ndarray:
        missing = [k for k in self.feature_names if k not in columns]
        if missing:
            raise FairnessError(f"missing predictor features: {missing}")
        cols = [np.asarray(columns[k], dtype=np.float64).reshape(-1)
                for k in self.feature_names]
        return np.stack(cols, axis=1)

    def predict(self, columns: dict[str, Array]) -> np.ndarray:
        raise NotImplementedError


class FunctionPredictor(Predictor):
    """Fixed predictor wrapping a vectorized callable on the feature matrix."""

    def __init__(self, feature_names, fn):
        self.feature_names = tuple(feature_names)
        if not self.feature_names:
            raise FairnessError("predictor needs at least one feature")
        self.fn = fn

    def predict(self, columns):
        out = np.asarray(self.fn(self.feature_matrix(columns)),
                         dtype=np.float64)
        return out.reshape(-1)


class MLPPredictor(Predictor):
    """Trainable regressor: tanh MLP on standardized features.

    Feature and target statistics are frozen by :meth:`fit_stats` (called
    by the trainers); the network always works on the standardized scale
    and ``predict`` maps back to target units.
    """

    trainable = True
    PREFIX = "net"

    def __init__(self, feature_names, hidden: tuple[int, ...] = (32, 32)):
        self.feature_names = tuple(feature_names)
        if not self.feature_names:
            raise FairnessError("predictor needs at least one feature")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise FairnessError("duplicate predictor features")
        self.hidden = tuple(hidden)
        self.spec = MLPSpec(len(self.feature_names), self.hidden, 1)
        self.store = ParamStore()
        k = len(self.feature_names)
        self.feature_loc = np.zeros(k)
        self.feature_scale = np.ones(k)
        self.target_loc = 0.0
        self.target_scale = 1.0

    def init_params(self, seed: int = 0) -> "MLPPredictor":
        # zeroed last layer: the initial prediction is the target mean
        self.store = ParamStore()
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        ad.init_mlp(self.store, self.PREFIX, self.spec, rng, zero_last=True)
        return self

    def fit_stats(self, x: np.ndarray, y: np.ndarray):
        scale = x.std(axis=0)
        self.feature_loc = x.mean(axis=0)
        self.feature_scale = np.where(scale > 0.0, scale, 1.0)
        s = float(np.std(y))
        self.target_loc = float(np.mean(y))
        self.target_scale = s if s > 0.0 else 1.0

    def norm_features(self, x: np.ndarray) -> np.ndarray:
        return (x - self.feature_loc) / self.feature_scale

    def net(self, ctx, x_norm):
        """Standardized-scale output, differentiable under a tape context."""
        out = ad.mlp_forward(ctx, self.spec, self.PREFIX, x_norm)
        return ad.reshape(out, (-1,))

    def predict(self, columns):
        x = self.norm_features(self.feature_matrix(columns))
        o = value_of(self.net(EvalContext(self.store), x))
        return o * self.target_scale + self.target_loc


# ------------------------------------------------------- intervention policy


def _policy_assignments(graph: CausalGraph, protected: str,
                        rows: dict[str, Array],
                        values=None) -> np.ndarray:
    """Protected-node assignments to average over, shape (n_values, n).

    Binary nodes default to the per-row complement; multi-valued nodes
    require an explicit value list.
    """
    if protected not in graph.by_name:
        raise FairnessError(f"unknown protected node {protected!r}")
    if protected in graph.confounder_names:
        raise FairnessError(f"protected node {protected!r} is a latent "
                            "confounder; audits need an observable node")
    x = np.asarray(rows[protected], dtype=np.float64).reshape(-1)
    if values is not None:
        vals = [float(v) for v in values]
        if not vals:
            raise FairnessError("empty intervention-value policy")
        return np.stack([np.full(x.shape[0], v) for v in vals])
    unit = graph.by_name[protected]
    if not unit.discrete:
        raise FairnessError(f"protected node {protected!r} is continuous; "
                            "give an explicit intervention-value policy")
    binary = unit.kind == "bernoulli" or getattr(unit, "n_classes", 0) == 2
    if not binary:
        raise FairnessError(f"non-binary protected node {protected!r} needs "
                            "an explicit intervention-value policy")
    return (1.0 - x)[None, :]


def _policy_label(values) -> str:
    if values is None:
        return "complement"
    return "values:" + ",".join(repr(float(v)) for v in values)


# ------------------------------------------------------------------ metrics


def cu_k(graph: CausalGraph, predictor: Predictor, protected: str,
         rows: dict[str, Array], k: int = 1,
         config: InferenceConfig = InferenceConfig(), values=None) -> float:
    """Counterfactual unfairness of degree k over the given evidence rows.

    For each row, Y is the factual prediction and Y' the expected
    prediction over the row's counterfactuals under the protected-node
    intervention policy; CU_k is the mean of |Y' - Y|^k.
    """
    if k < 1:
        raise FairnessError(f"degree must be >= 1, got {k}")
    unknown = set(predictor.feature_names) - set(graph.node_names)
    if unknown:
        raise FairnessError(f"predictor features outside the graph: "
                            f"{sorted(unknown)}")
    y = predictor.predict(rows)
    assignments = _policy_assignments(graph, protected, rows, values)
    yp = np.zeros_like(y)
    for a in assignments:
        yp += graph.counterfactual_mean(rows, {protected: a}, config,
                                        f=predictor.predict)
    yp /= assignments.shape[0]
    return float(np.mean(np.abs(yp - y) ** k))


def spearman_by_group(predictions, targets, groups) -> dict[str, float]:
    """Rank correlation of predictions vs targets within each group.

    Average-rank tie handling; groups with fewer than two rows, or with
    constant predictions or targets, are rejected.
    """
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    g = np.asarray(groups).reshape(-1)
    if not (p.shape == t.shape == g.shape):
        raise FairnessError("predictions, targets and groups must align")
    out: dict[str, float] = {}
    for label in np.unique(g):
        mask = g == label
        if int(mask.sum()) < 2:
            raise FairnessError(f"singleton group {_group_key(label)}")
        pg, tg = p[mask], t[mask]
        if np.unique(pg).size < 2 or np.unique(tg).size < 2:
            raise FairnessError(f"constant ranks in group {_group_key(label)}")
        out[_group_key(label)] = float(stats.spearmanr(pg, tg).statistic)
    return out


def _group_key(label) -> str:
    v = float(label)
    return str(int(v)) if v == int(v) else repr(v)


@dataclass
class FairnessReport:
    """Audit summary: unfairness values plus per-group rank preservation."""

    protected: str
    policy: str
    n_rows: int
    cu: dict[int, float]
    spearman: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.cu.items():
            if not (np.isfinite(v) and v >= 0.0):
                raise FairnessError(f"CU_{k} must be finite and >= 0, got {v}")
        for g, r in self.spearman.items():
            if not (-1.0 - 1e-12 <= r <= 1.0 + 1e-12):
                raise FairnessError(f"Spearman out of range for group {g}: {r}")

    def to_dict(self) -> dict:
        return {"protected": self.protected,
                "policy": self.policy,
                "n_rows": self.n_rows,
                "cu": {str(k): v for k, v in sorted(self.cu.items())},
                "spearman": dict(sorted(self.spearman.items()))}


def audit(graph: CausalGraph, predictor: Predictor, rows: dict[str, Array],
          target: str, protected: str,
          config: InferenceConfig = InferenceConfig(),
          ks: tuple[int, ...] = (1, 2), values=None) -> FairnessReport:
    """Full fairness report for a predictor on the given evidence rows."""
    cu = {int(k): cu_k(graph, predictor, protected, rows, k=int(k),
                       config=config, values=values)
          for k in ks}
    preds = predictor.predict(rows)
    sp = spearman_by_group(preds, rows[target], rows[protected])
    n = next(np.asarray(v).shape[0] for v in rows.values())
    return FairnessReport(protected=protected, policy=_policy_label(values),
                          n_rows=n, cu=cu, spearman=sp)


# ----------------------------------------------------------------- training


def holdout_split(n: int, fraction: float, seed: int):
    """Deterministic (train, held-out) index split, both sorted."""
    if not 0.0 < fraction < 1.0:
        raise FairnessError(f"holdout fraction must be in (0, 1), "
                            f"got {fraction}")
    # separate stream from the batch shuffler
    rng = np.random.default_rng(np.random.SeedSequence([seed, 104729]))
    idx = rng.permutation(n)
    n_test = max(1, int(round(n * fraction)))
    if n_test >= n:
        raise FairnessError("holdout leaves no training rows")
    return np.sort(idx[n_test:]), np.sort(idx[:n_test])


def _check_trainable(predictor, target):
    if not getattr(predictor, "trainable", False):
        raise FairnessError("predictor is not trainable")
    if target in predictor.feature_names:
        raise FairnessError(f"target {target!r} must not be a predictor "
                            "feature")


def _fit_loop(predictor: MLPPredictor, x: np.ndarray, y: np.ndarray,
              cf_x, lam: float, config: TrainConfig) -> list[float]:
    """Adam on MSE plus lam * CU_2, both on the standardized scale.

    ``cf_x`` holds the cached counterfactual feature sets, (n, n_cf, k),
    already in raw feature units; None when lam == 0.
    """
    n = x.shape[0]
    xn = predictor.norm_features(x)
    yn = (y - predictor.target_loc) / predictor.target_scale
    cfn = None
    if lam > 0.0:
        cfn = predictor.norm_features(cf_x.reshape(-1, x.shape[1]))
        cfn = cfn.reshape(cf_x.shape)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    curve: list[float] = []
    last_good = predictor.store.state_dict()
    best = np.inf
    since_best = 0
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for b, idx in enumerate(_epoch_batches(n, config.batch_size, rng)):
            try:
                tape = ad.Tape()
                ctx = TapeContext(tape, predictor.store)
                o = predictor.net(ctx, xn[idx])
                e = o - yn[idx]
                loss = ad.vmean(e * e)
                if lam > 0.0:
                    m, n_cf = idx.size, cfn.shape[1]
                    oc = predictor.net(ctx, cfn[idx].reshape(m * n_cf, -1))
                    gap = ad.vmean(ad.reshape(oc, (m, n_cf)), axis=1) - o
                    loss = loss + lam * ad.vmean(gap * gap)
                loss_value = float(loss.value)
                bad = not np.isfinite(loss_value)
                if not bad:
                    grads = tape.backward(loss)
                    ad.clip_grad_norm(grads, config.grad_clip)
                    ad.adam_step(predictor.store, grads, lr=config.lr)
                tape.release()
            except (ad.DomainError, ad.AutodiffError) as err:
                predictor.store.load_state_dict(last_good)
                raise TrainError(f"non-finite loss at epoch {epoch}, "
                                 f"batch {b}: {err}; "
                                 "parameters restored") from err
            if bad:
                predictor.store.load_state_dict(last_good)
                raise TrainError(f"non-finite loss at epoch {epoch}, "
                                 f"batch {b}; parameters restored")
            total += loss_value * idx.size
            count += idx.size
        curve.append(total / count)
        last_good = predictor.store.state_dict()
        if config.patience is not None:
            if curve[-1] < best - 1e-6:
                best, since_best = curve[-1], 0
            else:
                since_best += 1
                if since_best > config.patience:
                    break
    return curve


def train_predictor(predictor: MLPPredictor, rows: dict[str, Array],
                    target: str,
                    config: TrainConfig = TrainConfig()) -> list[float]:
    """Plain MSE fit of a trainable predictor; returns the loss curve."""
    _check_trainable(predictor, target)
    if target not in rows:
        raise FairnessError(f"target column {target!r} missing from rows")
    x = predictor.feature_matrix(rows)
    y = np.asarray(rows[target], dtype=np.float64).reshape(-1)
    predictor.fit_stats(x, y)
    return _fit_loop(predictor, x, y, None, 0.0, config)


def train_fair(graph: CausalGraph, predictor: MLPPredictor,
               rows: dict[str, Array], target: str, protected: str,
               lam: float, config: TrainConfig = TrainConfig(),
               cf_config: InferenceConfig | None = None,
               holdout: float = 0.2):
    """MSE + lam * CU_2 training; fairness is reported on a held-out split.

    The CU_2 term averages the predictor over cached counterfactual
    feature sets (N_CF_DEFAULT draws per training row under the
    complement policy); with lam == 0 this is exactly plain MSE training.
    Returns (predictor, FairnessReport).
    """
    if lam < 0.0:
        raise FairnessError(f"lambda must be >= 0, got {lam}")
    _check_trainable(predictor, target)
    unknown = set(predictor.feature_names) - set(graph.node_names)
    if unknown:
        raise FairnessError(f"predictor features outside the graph: "
                            f"{sorted(unknown)}")
    n = next(np.asarray(v).shape[0] for v in rows.values())
    train_idx, test_idx = holdout_split(n, holdout, config.seed)
    cols = {k: np.asarray(v, dtype=np.float64).reshape(-1)
            for k, v in rows.items()}
    train = {k: v[train_idx] for k, v in cols.items()}
    test = {k: v[test_idx] for k, v in cols.items()}

    x = predictor.feature_matrix(train)
    y = train[target]
    predictor.fit_stats(x, y)

    cf_cfg = cf_config or InferenceConfig(m=InferenceConfig().m,
                                          n=N_CF_DEFAULT, seed=config.seed)
    cf_x = None
    if lam > 0.0:
        assignments = _policy_assignments(graph, protected, train, None)
        mats = []
        for a in assignments:
            cf_cols = graph.counterfactual_columns(train, {protected: a},
                                                   cf_cfg)
            mats.append(predictor.feature_matrix(cf_cols)
                        .reshape(len(train_idx), cf_cfg.n, x.shape[1]))
        cf_x = np.concatenate(mats, axis=1)
    _fit_loop(predictor, x, y, cf_x, lam, config)

    eval_cfg = InferenceConfig(m=cf_cfg.m, n=max(cf_cfg.n, 25),
                               seed=config.seed)
    report = audit(graph, predictor, test, target, protected,
                   config=eval_cfg)
    return predictor, report


# ------------------------------------------------------------- explanations


@dataclass
class Explanation:
    """Per-sample counterfactual record under one intervention."""

    intervention: dict[str, float]
    factual: dict[str, float]
    counterfactual_means: dict[str, float]
    factual_prediction: float | None
    counterfactual_prediction: float | None

    def to_dict(self) -> dict:
        return {"intervention": dict(self.intervention),
                "factual": dict(self.factual),
                "counterfactual_means": dict(self.counterfactual_means),
                "factual_prediction": self.factual_prediction,
                "counterfactual_prediction": self.counterfactual_prediction}


def explain_sample(graph: CausalGraph, predictor: Predictor | None,
                   evidence: dict[str, float], intervention: dict,
                   config: InferenceConfig = InferenceConfig()
                   ) -> Explanation:
    """What would this sample look like, and score as, under do(...)?

    Every aggregate is the weighted mean over one counterfactual set, so
    the record is exactly consistent with ``expectation_under`` on
    ``graph.counterfactual(evidence, intervention, config)``.
    """
    cf = graph.counterfactual(evidence, intervention, config)
    means = {name: expectation_under(cf, lambda cols, k=name: cols[k])
             for name in graph.node_names}
    fact_pred = cf_pred = None
    if predictor is not None:
        one_row = {k: np.asarray(v, dtype=np.float64).reshape(-1)[:1]
                   for k, v in evidence.items()}
        fact_pred = float(predictor.predict(one_row)[0])
        cf_pred = expectation_under(cf, predictor.predict)
    return Explanation(
        intervention={k: float(v) for k, v in intervention.items()},
        factual={k: float(np.asarray(v).reshape(-1)[0])
                 for k, v in evidence.items()},
        counterfactual_means=means,
        factual_prediction=fact_pred,
        counterfactual_prediction=cf_pred)


# ------------------------------------------------- black-box batch protocol


def write_cf_inputs(path, graph: CausalGraph, rows: dict[str, Array],
                    protected: str,
                    config: InferenceConfig = InferenceConfig(),
                    values=None) -> tuple[int, int]:
    """Emit the audit batch for an external predictor.

    Each evidence row becomes one factual line (cf_id 0, weight 1)
    followed by its counterfactual draws (cf_id 1.., weights summing
    to 1).  Columns are every observable node plus row_id, cf_id,
    weight.  Returns (n_rows, draws per row).
    """
    assignments = _policy_assignments(graph, protected, rows, values)
    cols = {k: np.asarray(v, dtype=np.float64).reshape(-1)
            for k, v in rows.items()}
    n = next(v.shape[0] for v in cols.values())
    parts = [graph.counterfactual_columns(cols, {protected: a}, config)
             for a in assignments]
    total_cf = assignments.shape[0] * config.n
    w = 1.0 / total_cf
    names = list(graph.node_names)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(names + ["row_id", "cf_id", "weight"])
        for i in range(n):
            out.writerow([repr(float(cols[k][i])) for k in names]
                         + [i, 0, repr(1.0)])
            cf_id = 1
            for part in parts:
                for j in range(config.n):
                    out.writerow(
                        [repr(float(part[k][i * config.n + j]))
                         for k in names] + [i, cf_id, repr(w)])
                    cf_id += 1
    return n, total_cf


def _read_protocol_csv(path, required: tuple[str, ...]):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise FairnessError(f"{path}: empty protocol file")
            rows = list(reader)
    except OSError as err:
        raise FairnessError(f"cannot read protocol file {path}: {err}") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise FairnessError(f"{path}: missing columns {missing}")
    idx = {c: header.index(c) for c in required}
    return header, idx, rows


def black_box_join(inputs_path, preds_path):
    """Join an emitted batch with an external predictions file.

    ``cf-preds.csv`` must cover exactly the (row_id, cf_id) pairs of
    ``cf-inputs.csv``; gaps, duplicates and extras are rejected.
    Returns (factual, counterfactual-expectation) prediction arrays,
    one entry per audited row.
    """
    _, iidx, irows = _read_protocol_csv(
        inputs_path, ("row_id", "cf_id", "weight"))
    _, pidx, prows = _read_protocol_csv(
        preds_path, ("row_id", "cf_id", "prediction"))
    try:
        weights = {(int(r[iidx["row_id"]]), int(r[iidx["cf_id"]])):
                   float(r[iidx["weight"]]) for r in irows}
        preds = {}
        for r in prows:
            key = (int(r[pidx["row_id"]]), int(r[pidx["cf_id"]]))
            if key in preds:
                raise FairnessError(
                    f"{preds_path}: duplicate entry for row_id={key[0]} "
                    f"cf_id={key[1]}")
            preds[key] = float(r[pidx["prediction"]])
    except (ValueError, IndexError) as err:
        if isinstance(err, FairnessError):
            raise
        raise FairnessError(f"malformed protocol row: {err}") from None
    if len(weights) != len(irows):
        raise FairnessError(f"{inputs_path}: duplicate row_id/cf_id pairs")
    if set(preds) != set(weights):
        gaps = sorted(set(weights) - set(preds))[:3]
        extra = sorted(set(preds) - set(weights))[:3]
        raise FairnessError(
            f"{preds_path}: row_id/cf_id gaps (missing {gaps}, "
            f"unexpected {extra})")
    row_ids = sorted({rid for rid, _ in weights})
    if row_ids != list(range(len(row_ids))):
        raise FairnessError(f"{inputs_path}: row_id gaps")
    y = np.empty(len(row_ids))
    yp = np.empty(len(row_ids))
    for rid in row_ids:
        if (rid, 0) not in weights:
            raise FairnessError(f"{inputs_path}: row {rid} has no factual "
                                "line (cf_id 0)")
        cf_ids = sorted(cid for r, cid in weights if r == rid and cid > 0)
        if cf_ids != list(range(1, len(cf_ids) + 1)):
            raise FairnessError(f"{inputs_path}: cf_id gaps in row {rid}")
        w = np.array([weights[(rid, c)] for c in cf_ids])
        p = np.array([preds[(rid, c)] for c in cf_ids])
        y[rid] = preds[(rid, 0)]
        yp[rid] = float(np.sum(w * p) / np.sum(w))
    return y, yp


def black_box_cu(inputs_path, preds_path,
                 ks: tuple[int, ...] = (1, 2)) -> dict[int, float]:
    """CU_k from an emitted batch and an external predictions file."""
    y, yp = black_box_join(inputs_path, preds_path)
    return {int(k): float(np.mean(np.abs(yp - y) ** int(k))) for k in ks}


# -------------------------------------------------------------- checkpoints


def predictor_dict(predictor: MLPPredictor) -> dict:
    params = {name: predictor.store[name].tolist()
              for name in sorted(predictor.store.names())}
    return {"version": CKPT_VERSION,
            "kind": "predictor",
            "feature_names": list(predictor.feature_names),
            "hidden": list(predictor.hidden),
            "params": params,
            "feature_stats": {"loc": predictor.feature_loc.tolist(),
                              "scale": predictor.feature_scale.tolist()},
            "target_stats": {"loc": predictor.target_loc,
                             "scale": predictor.target_scale}}


def save_predictor(path, predictor: MLPPredictor):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(predictor_dict(predictor), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_predictor(path) -> MLPPredictor:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as err:
        raise FairnessError(f"malformed predictor checkpoint {path}: "
                            f"{err}") from None
    if not isinstance(doc, dict) or doc.get("version") != CKPT_VERSION:
        raise FairnessError(f"unsupported checkpoint version in {path}")
    if doc.get("kind") != "predictor":
        raise FairnessError(f"{path}: not a predictor checkpoint "
                            f"(kind={doc.get('kind')!r})")
    try:
        predictor = MLPPredictor(tuple(doc["feature_names"]),
                                 tuple(int(h) for h in doc["hidden"]))
        predictor.init_params(0)
        expected = set(predictor.store.names())
        if set(doc["params"]) != expected:
            raise FairnessError(f"{path}: parameter set mismatch")
        for name, value in doc["params"].items():
            # assignment into initialized parameters enforces exact shapes
            predictor.store[name] = np.asarray(value, dtype=np.float64)
        fs = doc["feature_stats"]
        predictor.feature_loc = np.asarray(fs["loc"], dtype=np.float64)
        predictor.feature_scale = np.asarray(fs["scale"], dtype=np.float64)
        if predictor.feature_loc.shape != (len(predictor.feature_names),):
            raise FairnessError(f"{path}: feature stats shape mismatch")
        ts = doc["target_stats"]
        predictor.target_loc = float(ts["loc"])
        predictor.target_scale = float(ts["scale"])
    except (KeyError, TypeError, ad.AutodiffError) as err:
        raise FairnessError(f"malformed predictor checkpoint {path}: "
                            f"{err}") from err
    return predictor
