"""Causal graph engine: wiring, sampling, likelihood, counterfactuals.

A graph is an ordered set of named units plus the parent lists tying
them together.  Latent confounders are parentless N(0,1) sources whose
values feed their children but never appear in data rows; their effect
on the likelihood is integrated out by Monte Carlo (log-sum-exp over M
draws) and their posterior handled by importance sampling during
counterfactual estimation.

Counterfactuals follow abduct -> intervene -> predict: draw noise from
its posterior given the evidence, replace intervened mechanisms with
constants, and replay the graph forward under the shared noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import autodiff as ad
from .autodiff import EvalContext, TapeContext, value_of
from .units import CausalUnit, ConfounderUnit, UnitError

Array = np.ndarray


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class InferenceConfig:
    """Sampling budgets: m confounder draws, n counterfactual samples."""

    m: int = 100
    n: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise GraphError("m and n must be at least 1")


@dataclass
class CounterfactualSet:
    """Weighted counterfactual rows for one piece of evidence."""

    columns: dict[str, Array]
    weights: Array
    m_used: int

    def __len__(self):
        return self.weights.shape[0]


def expectation_under(cf: CounterfactualSet, f) -> float:
    """Weighted expectation of f over the counterfactual rows.

    ``f`` may be vectorized (dict of columns -> array of per-row values)
    or scalar (dict of floats -> float); vectorized is tried first.
    """
    n = len(cf)
    if n == 0:
        raise GraphError("empty counterfactual set")
    try:
        vals = np.asarray(f(cf.columns), dtype=np.float64)
        if vals.shape != (n,):
            raise TypeError
    except (TypeError, ValueError, AttributeError, IndexError, KeyError):
        vals = np.array([f({k: v[i] for k, v in cf.columns.items()})
                         for i in range(n)], dtype=np.float64)
    return float(np.sum(cf.weights * vals))


def _systematic_resample(weights: Array, n: int, rng) -> Array:
    """Indices of n draws from the weight vector, systematic (low-variance)."""
    positions = (rng.random() + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions).clip(0, weights.size - 1)


class CausalGraph:
    """DAG of causal units sharing one parameter store."""

    def __init__(self, units: list[CausalUnit]):
        names = [u.name for u in units]
        if len(set(names)) != len(names):
            raise GraphError("duplicate node names")
        self.units = list(units)
        self.by_name = {u.name: u for u in units}
        self.store = ad.ParamStore()
        self.confounder_names = [u.name for u in units
                                 if isinstance(u, ConfounderUnit)]
        self.order = self._validate_and_order()
        self.node_names = [n for n in self.order
                           if n not in self.confounder_names]

    # ------------------------------------------------------------ wiring

    def _validate_and_order(self) -> list[str]:
        children: dict[str, list[str]] = {u.name: [] for u in self.units}
        indeg = {u.name: 0 for u in self.units}
        for u in self.units:
            if isinstance(u, ConfounderUnit) and u.parent_names:
                raise GraphError(f"confounder {u.name!r} cannot have parents")
            for p in u.parent_names:
                if p not in self.by_name:
                    raise GraphError(f"node {u.name!r} names unknown parent {p!r}")
                children[p].append(u.name)
                indeg[u.name] += 1
        for c in self.confounder_names:
            if not children[c]:
                raise GraphError(f"confounder {c!r} has no children")
        # Kahn's algorithm; the ready queue keeps declaration order
        order, ready = [], [u.name for u in self.units if indeg[u.name] == 0]
        while ready:
            name = ready.pop(0)
            order.append(name)
            for ch in children[name]:
                indeg[ch] -= 1
                if indeg[ch] == 0:
                    ready.append(ch)
        if len(order) < len(self.units):
            cyc = self._find_cycle(
                {n for n in indeg if n not in order})
            raise GraphError(f"cycle detected: {' -> '.join(cyc)}")
        return order

    def _find_cycle(self, candidates: set) -> list[str]:
        start = next(iter(sorted(candidates)))
        path, seen = [start], {start}
        node = start
        while True:
            node = next(p for p in self.by_name[node].parent_names
                        if p in candidates)
            if node in seen:
                return path[path.index(node):][::-1] + [node]
            path.append(node)
            seen.add(node)

    def init_params(self, seed: int = 0):
        """Create all unit parameters, one child seed stream per node."""
        streams = np.random.SeedSequence(seed).spawn(len(self.order))
        for name, ss in zip(self.order, streams):
            self.by_name[name].init_params(self.store,
                                           np.random.default_rng(ss))
        return self

    def _node_rngs(self, seed) -> dict[str, np.random.Generator]:
        streams = np.random.SeedSequence(seed).spawn(len(self.order))
        return {name: np.random.default_rng(ss)
                for name, ss in zip(self.order, streams)}

    def _parent_matrix(self, cols: dict[str, Array], names, n: int) -> Array:
        if not names:
            return np.zeros((n, 0))
        return np.stack([np.broadcast_to(cols[p], (n,)) for p in names], axis=1)

    def _check_intervention(self, intervention: dict):
        for name in intervention:
            if name in self.confounder_names:
                raise GraphError(f"cannot intervene on confounder {name!r}")
            if name not in self.by_name:
                raise GraphError(f"unknown intervention target {name!r}")

    def _check_rows(self, rows: dict[str, Array]):
        missing = [n for n in self.node_names if n not in rows]
        if missing:
            raise GraphError(f"incomplete evidence: missing {missing}")
        for n in self.node_names:
            if not np.all(np.isfinite(np.asarray(rows[n], dtype=np.float64))):
                raise GraphError(f"non-finite evidence for node {n!r}")

    # ---------------------------------------------------------- sampling

    def sample(self, n: int, intervention: dict | None = None, seed: int = 0,
               return_noise: bool = False):
        """Ancestral sampling; intervened nodes are pinned constants."""
        intervention = dict(intervention or {})
        self._check_intervention(intervention)
        rngs = self._node_rngs(seed)
        noise: dict[str, Array] = {}
        for name in self.order:
            if name in intervention:
                continue
            noise[name] = self.by_name[name].draw_noise(rngs[name], n)
        cols = self.push_forward(noise, intervention, n=n)
        return (cols, noise) if return_noise else cols

    def push_forward(self, noise: dict[str, Array],
                     intervention: dict | None = None,
                     n: int | None = None) -> dict[str, Array]:
        """Deterministic replay of the graph under the given noise.

        ``noise`` holds per-node noise realizations (confounder entries
        are the confounder values themselves).  Intervened nodes need no
        noise entry.  Returns observable columns only.
        """
        intervention = dict(intervention or {})
        self._check_intervention(intervention)
        if n is None:
            n = next(np.asarray(v).shape[0] for v in noise.values())
        values: dict[str, Array] = {}
        for name in self.order:
            unit = self.by_name[name]
            if name in intervention:
                values[name] = np.broadcast_to(
                    np.asarray(intervention[name], dtype=np.float64), (n,)).copy()
                continue
            if name not in noise:
                raise GraphError(f"missing noise for node {name!r}")
            parents = self._parent_matrix(values, unit.parent_names, n)
            values[name] = unit.sample(self.store, parents, noise[name])
        return {name: values[name] for name in self.node_names}

    # -------------------------------------------------------- likelihood

    def confounder_draws(self, n: int, m: int, rng) -> dict[str, Array]:
        """Per-row stratified standard-normal draws, (n, m) per confounder.

        Each row gets one draw per equal-probability stratum in shuffled
        order, which keeps the empirical measure close to the prior at
        any m while remaining unbiased and independent across rows.
        """
        draws = {}
        for name in self.confounder_names:
            perm = np.argsort(rng.random((n, m)), axis=1)
            u = stats.norm.ppf((perm + rng.random((n, m))) / m)
            draws[name] = u
        return draws

    def loglk_given_u(self, ctx, rows: dict[str, Array],
                      u: dict[str, Array] | None = None):
        """Per-row log-density; differentiable when ctx carries a tape.

        With confounders, ``u`` maps confounder name to (n, m) draws and
        the result is logsumexp over the m draws minus log m.  Without
        confounders ``u`` is ignored and the product rule applies directly.
        """
        n = next(np.asarray(v).shape[0] for v in rows.values())
        self._check_rows(rows)
        if not self.confounder_names:
            total = None
            for name in self.node_names:
                unit = self.by_name[name]
                parents = self._parent_matrix(rows, unit.parent_names, n)
                term = unit.loglk(ctx, parents, np.asarray(rows[name],
                                                           dtype=np.float64))
                total = term if total is None else total + term
            return total
        if u is None:
            raise GraphError("confounded graph needs confounder draws")
        m = next(iter(u.values())).shape[1]
        flat = {name: np.repeat(np.asarray(rows[name], dtype=np.float64), m)
                for name in self.node_names}
        for cname, draws in u.items():
            flat[cname] = draws.reshape(-1)
        total = None
        for name in self.node_names:
            unit = self.by_name[name]
            parents = self._parent_matrix(flat, unit.parent_names, n * m)
            term = unit.loglk(ctx, parents, flat[name])
            total = term if total is None else total + term
        per_draw = ad.reshape(total, (n, m))
        return ad.logsumexp(per_draw, axis=1) - np.log(m)

    def loglk(self, rows: dict[str, Array], m: int = 100,
              seed: int = 0) -> Array:
        """Non-differentiable per-row log-density (plain numpy path)."""
        n = next(np.asarray(v).shape[0] for v in rows.values())
        u = None
        if self.confounder_names:
            u = self.confounder_draws(n, m, np.random.default_rng(seed))
        return self.loglk_given_u(EvalContext(self.store), rows, u)

    # --------------------------------------------------------- abduction

    def abduct_all(self, rows: dict[str, Array],
                   confounder_values: dict[str, Array] | None = None,
                   seed: int = 0) -> dict[str, Array]:
        """Noise-posterior draws that regenerate the evidence rows."""
        confounder_values = dict(confounder_values or {})
        if set(confounder_values) != set(self.confounder_names):
            raise GraphError("confounder values must cover exactly the "
                             f"confounders {self.confounder_names}")
        self._check_rows(rows)
        n = next(np.asarray(v).shape[0] for v in rows.values())
        cols = {k: np.asarray(v, dtype=np.float64) for k, v in rows.items()}
        cols.update(confounder_values)
        rngs = self._node_rngs(seed)
        noise = {}
        for name in self.order:
            unit = self.by_name[name]
            if name in self.confounder_names:
                noise[name] = np.broadcast_to(
                    np.asarray(confounder_values[name], dtype=np.float64),
                    (n,)).copy()
                continue
            parents = self._parent_matrix(cols, unit.parent_names, n)
            noise[name] = unit.abduct(self.store, parents, cols[name],
                                      rngs[name])
        return noise

    # ---------------------------------------------------- counterfactuals

    def counterfactual(self, evidence: dict[str, float],
                       intervention: dict,
                       config: InferenceConfig = InferenceConfig()
                       ) -> CounterfactualSet:
        """Three-step counterfactual for one evidence row.

        Without confounders: N noise-posterior draws pushed through the
        intervened graph, uniform weights.  With confounders: M prior
        draws u_j scored by p(evidence | u_j), softmax importance weights,
        N samples allocated across the u_j by systematic resampling, then
        abduction and replay with the confounders pinned.
        """
        self._check_intervention(intervention)
        ev = {k: np.asarray(v, dtype=np.float64).reshape(-1)[:1]
              for k, v in evidence.items()}
        self._check_rows(ev)
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
        n_cf = config.n

        if not self.confounder_names:
            tiled = {k: np.repeat(v, n_cf) for k, v in ev.items()}
            noise = self.abduct_all(tiled, {}, seed=config.seed)
            cols = self.push_forward(noise, intervention, n=n_cf)
            weights = np.full(n_cf, 1.0 / n_cf)
            return CounterfactualSet(cols, weights, m_used=0)

        m = config.m
        u = self.confounder_draws(1, m, rng)
        tiled_m = {k: np.repeat(v, m) for k, v in ev.items()}
        flat_u = {k: v.reshape(-1) for k, v in u.items()}
        totals = self._conditional_loglk(tiled_m, flat_u)
        if not np.any(np.isfinite(totals)):
            raise GraphError("evidence-implausibility: zero likelihood "
                             "under every confounder draw")
        w = special.softmax(totals)
        picks = _systematic_resample(w, n_cf, rng)
        pinned = {k: v[picks] for k, v in flat_u.items()}
        tiled_n = {k: np.repeat(v, n_cf) for k, v in ev.items()}
        noise = self.abduct_all(tiled_n, pinned, seed=config.seed)
        cols = self.push_forward(noise, intervention, n=n_cf)
        weights = np.full(n_cf, 1.0 / n_cf)
        return CounterfactualSet(cols, weights, m_used=m)

    def _conditional_loglk(self, rows: dict[str, Array],
                           confounder_values: dict[str, Array]) -> Array:
        """Sum_k log p(v_k | pa_k, u) per row, with u pinned (not summed)."""
        n = next(np.asarray(v).shape[0] for v in rows.values())
        cols = {k: np.asarray(v, dtype=np.float64) for k, v in rows.items()}
        cols.update(confounder_values)
        ctx = EvalContext(self.store)
        total = np.zeros(n)
        for name in self.node_names:
            unit = self.by_name[name]
            parents = self._parent_matrix(cols, unit.parent_names, n)
            with np.errstate(over="ignore", under="ignore"):
                total = total + unit.loglk(ctx, parents, cols[name])
        return total

    def counterfactual_columns(self, rows: dict[str, Array],
                               intervention: dict,
                               config: InferenceConfig = InferenceConfig()
                               ) -> dict[str, Array]:
        """Batched counterfactual draws for many evidence rows at once.

        ``intervention`` values may be scalars or per-row arrays.  Returns
        flattened columns with ``config.n`` consecutive draws per evidence
        row (reshape to ``(n_rows, config.n)`` to group them).  Equivalent
        to calling :meth:`counterfactual` per row (same estimator),
        vectorized over rows for audit-scale workloads.
        """
        self._check_intervention(intervention)
        self._check_rows(rows)
        n = next(np.asarray(v).shape[0] for v in rows.values())
        n_cf = config.n
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))

        if self.confounder_names:
            m = config.m
            u = self.confounder_draws(n, m, rng)
            flat_rows = {k: np.repeat(np.asarray(v, dtype=np.float64), m)
                         for k, v in rows.items()}
            flat_u = {k: v.reshape(-1) for k, v in u.items()}
            totals = self._conditional_loglk(flat_rows, flat_u).reshape(n, m)
            if not np.all(np.any(np.isfinite(totals), axis=1)):
                raise GraphError("evidence-implausibility in batched rows")
            w = special.softmax(totals, axis=1)
            cum = np.cumsum(w, axis=1)
            pos = (rng.random((n, 1)) + np.arange(n_cf)) / n_cf
            picks = np.stack([np.searchsorted(cum[i], pos[i])
                              for i in range(n)]).clip(0, m - 1)
            pinned = {k: u[k][np.arange(n)[:, None], picks].reshape(-1)
                      for k in u}
        else:
            pinned = {}

        rep = {k: np.repeat(np.asarray(v, dtype=np.float64), n_cf)
               for k, v in rows.items()}
        iv = {k: np.repeat(np.broadcast_to(np.asarray(v, dtype=np.float64),
                                           (n,)), n_cf)
              for k, v in intervention.items()}
        noise = self.abduct_all(rep, pinned, seed=config.seed)
        return self.push_forward(noise, iv, n=n * n_cf)

    def counterfactual_mean(self, rows: dict[str, Array], intervention: dict,
                            config: InferenceConfig = InferenceConfig(),
                            f=None) -> dict[str, Array] | Array:
        """Per-row counterfactual means of every column, or of ``f(columns)``."""
        cols = self.counterfactual_columns(rows, intervention, config)
        n = next(np.asarray(v).shape[0] for v in rows.values())
        n_cf = config.n
        if f is not None:
            vals = np.asarray(f(cols), dtype=np.float64)
            return vals.reshape(n, n_cf).mean(axis=1)
        return {k: v.reshape(n, n_cf).mean(axis=1) for k, v in cols.items()}
