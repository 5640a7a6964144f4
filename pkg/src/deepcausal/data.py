"""Datasets and graph specifications.

Three responsibilities: a synthetic salary generator with a known causal
story (used across the examples and fairness workflows), CSV ingestion
with deterministic schema inference, and construction of graph
specifications (complete graphs over tabular columns, plus the salary
modeling graph).  Graph specs serialize as versioned JSON ("dcg-spec/1").
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .flows import NCFUnit
from .graph import CausalGraph, GraphError
from .units import (ALDUnit, BernoulliUnit, CategoricalUnit, ConfounderUnit,
                    GLMUnit, NormalUnit)


class DataError(ValueError):
    pass


# ---------------------------------------------------------------- Dataset


@dataclass
class Dataset:
    """Rectangular typed columns; kinds are 'float' or 'cat' (integer codes)."""

    names: list[str]
    columns: dict[str, np.ndarray]
    kinds: dict[str, str]

    def __post_init__(self):
        lengths = {len(self.columns[n]) for n in self.names}
        if len(lengths) > 1:
            raise DataError("ragged columns")

    @property
    def n(self) -> int:
        return len(self.columns[self.names[0]])

    def subset(self, idx) -> "Dataset":
        return Dataset(list(self.names),
                       {k: v[idx] for k, v in self.columns.items()},
                       dict(self.kinds))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names)
            cols = [self.columns[n] for n in self.names]
            cats = [self.kinds[n] == "cat" for n in self.names]
            for i in range(self.n):
                writer.writerow([str(int(c[i])) if cat else repr(float(c[i]))
                                 for c, cat in zip(cols, cats)])


def load_csv(path) -> Dataset:
    """Read a rectangular CSV; columns with <= 10 distinct non-negative
    integer values become categorical, everything else float."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        raw = []
        for r, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: line {r}: expected {len(header)} "
                                f"fields, got {len(row)}")
            raw.append(row)
    if not raw:
        raise DataError(f"{path}: no data rows")
    columns, kinds = {}, {}
    for j, name in enumerate(header):
        vals = np.empty(len(raw))
        for i, row in enumerate(raw):
            cell = row[j].strip()
            if cell == "":
                raise DataError(f"{path}: line {i + 2}, column {name!r}: "
                                "missing value")
            try:
                vals[i] = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {i + 2}, column {name!r}: "
                                f"not a number: {cell!r}") from None
        distinct = np.unique(vals)
        integral = np.all(vals == np.floor(vals)) and np.all(vals >= 0)
        if integral and distinct.size <= 10:
            kinds[name] = "cat"
        else:
            kinds[name] = "float"
        columns[name] = vals
    return Dataset(list(header), columns, kinds)


# ------------------------------------------------------------- GraphSpec


UNIT_CLASSES = {
    "flow": NCFUnit,
    "normal": NormalUnit,
    "ald": ALDUnit,
    "glm": GLMUnit,
    "bernoulli": BernoulliUnit,
    "categorical": CategoricalUnit,
    "confounder": ConfounderUnit,
}


@dataclass
class NodeSpec:
    name: str
    kind: str
    parents: list[str] = field(default_factory=list)
    options: dict = field(default_factory=dict)


@dataclass
class GraphSpec:
    nodes: list[NodeSpec]
    seed: int = 0

    def to_dict(self) -> dict:
        return {"version": "dcg-spec/1", "seed": self.seed,
                "nodes": [{"name": n.name, "kind": n.kind,
                           "parents": list(n.parents),
                           "options": dict(n.options)} for n in self.nodes]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSpec":
        if d.get("version") != "dcg-spec/1":
            raise DataError(f"unsupported graph-spec version: "
                            f"{d.get('version')!r}")
        nodes = [NodeSpec(n["name"], n["kind"], list(n.get("parents", [])),
                          dict(n.get("options", {})))
                 for n in d["nodes"]]
        return cls(nodes, seed=int(d.get("seed", 0)))

    @classmethod
    def from_json(cls, text: str) -> "GraphSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as err:
            raise DataError(f"malformed graph spec: {err}") from None
        return cls.from_dict(d)

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def build(self) -> CausalGraph:
        units = []
        for n in self.nodes:
            if n.kind not in UNIT_CLASSES:
                raise DataError(f"node {n.name!r}: unknown unit kind {n.kind!r}")
            cls_ = UNIT_CLASSES[n.kind]
            opts = {k: tuple(v) if isinstance(v, list) else v
                    for k, v in n.options.items()}
            if n.kind == "confounder":
                unit = cls_(n.name)
            else:
                unit = cls_(n.name, tuple(n.parents), **opts)
            units.append(unit)
        try:
            return CausalGraph(units)
        except GraphError as err:
            raise DataError(str(err)) from err


def complete_graph_spec(dataset: Dataset, unit_kind: str = "flow",
                        seed: int = 0) -> GraphSpec:
    """Every column depends on all columns to its left (file order)."""
    if not dataset.names:
        raise DataError("empty dataset")
    if unit_kind not in ("flow", "normal", "ald", "glm"):
        raise DataError(f"unit kind {unit_kind!r} is not a continuous unit")
    nodes = []
    for i, name in enumerate(dataset.names):
        parents = dataset.names[:i]
        if dataset.kinds[name] == "cat":
            classes = np.unique(dataset.columns[name]).size
            k_classes = int(dataset.columns[name].max()) + 1
            if classes <= 2 and k_classes <= 2:
                nodes.append(NodeSpec(name, "bernoulli", parents))
            else:
                nodes.append(NodeSpec(name, "categorical", parents,
                                      {"n_classes": k_classes}))
        else:
            nodes.append(NodeSpec(name, unit_kind, parents))
    return GraphSpec(nodes, seed=seed)


def salary_graph_spec(unit_kind: str = "flow", seed: int = 0) -> GraphSpec:
    """Modeling graph for the salary data: observable mechanisms plus a
    latent source confounding gender and age (the selection effect)."""
    return GraphSpec([
        NodeSpec("stay_home", "confounder"),
        NodeSpec("gender", "bernoulli", ["stay_home"]),
        NodeSpec("age", unit_kind, ["stay_home"]),
        NodeSpec("education", unit_kind, ["age"]),
        NodeSpec("field", "bernoulli", ["gender"]),
        NodeSpec("seniority", unit_kind, ["gender", "field", "education"]),
        NodeSpec("salary", unit_kind, ["seniority", "education", "field"]),
    ], seed=seed)


# ---------------------------------------------------------- salary data


# selection strength calibrated by bisection so that the kept-sample
# gender-age correlation lands at 0.29 (see tests for the check)
BETA_DEFAULT = 0.273


@dataclass(frozen=True)
class SalaryGenConfig:
    n: int = 5000
    seed: int = 0
    beta: float = BETA_DEFAULT

    def __post_init__(self):
        if self.n < 1:
            raise DataError("n must be at least 1")
        if self.beta < 0:
            raise DataError("beta must be non-negative")


SALARY_COLUMNS = ["gender", "age", "education", "field", "seniority", "salary"]


def _salary_batch(rng: np.random.Generator, size: int,
                  gender_override: float | None = None) -> dict[str, np.ndarray]:
    interests = rng.standard_normal(size)
    experience = rng.standard_normal(size)
    gender = (rng.random(size) < 0.5).astype(np.float64)  # 1 = male
    if gender_override is not None:
        gender = np.full(size, float(gender_override))
    age = 22.0 + rng.gamma(6.0, 3.0, size)
    education = special.expit(0.06 * (age - 40.0) + 0.5 * interests
                              + 0.35 * rng.standard_normal(size))
    field = (rng.random(size) < special.expit(-2.0 + 4.0 * gender
                                              + 0.5 * interests)
             ).astype(np.float64)
    seniority = (1.0 + 0.4 * gender + 0.3 * field + 0.8 * education
                 + 0.3 * experience + 0.15 * rng.standard_normal(size))
    salary = (20000.0 + 4500.0 * seniority + 6000.0 * education
              + 2500.0 * field + 1500.0 * rng.standard_normal(size))
    return {"gender": gender, "age": age, "education": education,
            "field": field, "seniority": seniority, "salary": salary}


def gen_salary(config: SalaryGenConfig) -> tuple[Dataset, GraphSpec]:
    """Generate the salary table.

    Women are dropped with probability sigmoid(beta * (age - 40)), i.e.
    stay-at-home selection rising with age; survivors exhibit the
    gender-age correlation a latent confounder would induce.  At beta=0
    nothing is dropped and gender is independent of age.
    """
    rng = np.random.default_rng(config.seed)
    kept: list[dict] = []
    total = 0
    while total < config.n:
        batch = _salary_batch(rng, 4096)
        if config.beta > 0:
            drop_p = special.expit(config.beta * (batch["age"] - 40.0))
            drop = (batch["gender"] == 0.0) & (rng.random(4096) < drop_p)
            keep = ~drop
            batch = {k: v[keep] for k, v in batch.items()}
        kept.append(batch)
        total += len(batch["gender"])
    columns = {k: np.concatenate([b[k] for b in kept])[:config.n]
               for k in SALARY_COLUMNS}
    kinds = {k: ("cat" if k in ("gender", "field") else "float")
             for k in SALARY_COLUMNS}
    return (Dataset(list(SALARY_COLUMNS), columns, kinds),
            salary_graph_spec(seed=config.seed))


def dataset_rows(dataset: Dataset) -> dict[str, np.ndarray]:
    return {k: dataset.columns[k] for k in dataset.names}
