"""Causal units: per-node distributions with sample / loglk / abduct.

Each unit owns the generative mechanism of one node.  ``sample`` maps
(parents, noise) to a value deterministically; ``loglk`` scores observed
values differentiably; ``abduct`` draws from the noise posterior given an
observed value, so that re-running ``sample`` on the draw reproduces the
observation (exactly for discrete units, to float precision for
continuous ones).

Continuous units operate on a normalized internal scale.  ``Normalizer``
holds the location/scale learned from training data; densities reported
in data space carry the -log s change-of-variables correction.  Parent
values are likewise shifted/scaled (per-parent stats installed at
warm-start) before entering the parameter network.

All operations are vectorized over a batch of rows: parents is (n, P),
values and noise are (n,) (noise is (n, K) for categorical units).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import (EvalContext, MLPSpec, ParamStore, clip, columns,
                       concat_cols, exp, log, logsumexp, matmul, reshape,
                       sigmoid, softplus, take_along, value_of, vsum, where)

LOG_2PI = math.log(2.0 * math.pi)


class UnitError(ValueError):
    """Unit evaluation failed; the message names the node."""


@dataclass
class Normalizer:
    """Affine data-space <-> model-space map for one continuous column."""

    m: float = 0.0
    s: float = 1.0

    @classmethod
    def fit(cls, column: np.ndarray, name: str = "column") -> "Normalizer":
        column = np.asarray(column, dtype=np.float64)
        if column.size < 2 or np.unique(column).size < 2:
            raise UnitError(f"degenerate column for {name!r}: "
                            "need at least two distinct values")
        return cls(m=float(column.mean()), s=float(column.std()))

    def normalize(self, x):
        return (x - self.m) / self.s

    def denormalize(self, z):
        return z * self.s + self.m

    def loglk_correction(self) -> float:
        # log p_x(x) = log p_z((x-m)/s) - log s
        return -math.log(self.s)


class CausalUnit:
    """Shared plumbing: parameter head, parent scaling, error wrapping."""

    kind = "base"
    discrete = False
    # number of raw parameters the head emits per row
    head_dim = 1

    def __init__(self, name: str, parent_names: tuple[str, ...] = (),
                 hidden: tuple[int, ...] = (32, 32)):
        self.name = name
        self.parent_names = tuple(parent_names)
        self.hidden = tuple(hidden)
        self.normalizer = Normalizer()
        self.parent_loc = np.zeros(len(self.parent_names))
        self.parent_scale = np.ones(len(self.parent_names))

    @property
    def n_parents(self) -> int:
        return len(self.parent_names)

    def mlp_spec(self) -> MLPSpec | None:
        if self.n_parents == 0:
            return None
        return MLPSpec(self.n_parents, self.hidden, self.head_dim)

    def init_params(self, store: ParamStore, rng: np.random.Generator):
        spec = self.mlp_spec()
        if spec is None:
            store.create(f"{self.name}.theta", np.zeros(self.head_dim))
        else:
            # zeroed last layer: initial output is the bias regardless of
            # parents, so every unit starts at its base distribution
            ad.init_mlp(store, self.name, spec, rng, zero_last=True)

    def param_names(self) -> list[str]:
        spec = self.mlp_spec()
        if spec is None:
            return [f"{self.name}.theta"]
        return ad.mlp_param_names(self.name, spec)

    def set_parent_stats(self, loc: np.ndarray, scale: np.ndarray):
        if loc.shape != (self.n_parents,) or scale.shape != (self.n_parents,):
            raise UnitError(f"node {self.name!r}: parent stats shape mismatch")
        self.parent_loc = loc.astype(np.float64)
        self.parent_scale = scale.astype(np.float64)

    def head(self, ctx, parents, n: int):
        """Raw parameter rows (n, head_dim) from the parent values."""
        try:
            if self.n_parents == 0:
                theta = reshape(ctx.param(f"{self.name}.theta"),
                                (1, self.head_dim))
                return matmul(np.ones((n, 1)), theta)
            if not np.all(np.isfinite(value_of(parents))):
                raise UnitError(f"node {self.name!r}: non-finite parent value")
            x = (parents - self.parent_loc) * (1.0 / self.parent_scale)
            out = ad.mlp_forward(ctx, self.mlp_spec(), self.name, x)
        except ad.AutodiffError as err:
            raise UnitError(f"node {self.name!r}: {err}") from err
        if not np.all(np.isfinite(value_of(out))):
            raise UnitError(f"node {self.name!r}: non-finite parameter output")
        return out

    def _eval_head_np(self, store: ParamStore, parents: np.ndarray, n: int):
        return value_of(self.head(EvalContext(store), parents, n))

    # subclasses implement: draw_noise, sample, loglk, abduct

    def draw_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, store, parents, eps) -> np.ndarray:
        raise NotImplementedError

    def loglk(self, ctx, parents, value):
        raise NotImplementedError

    def abduct(self, store, parents, value, rng) -> np.ndarray:
        raise NotImplementedError


class NormalUnit(CausalUnit):
    """Gaussian node: head emits (mu, log sigma) on the normalized scale."""

    kind = "normal"
    head_dim = 2
    posterior_kind = "exact"

    def _params(self, ctx, parents, n):
        raw = self.head(ctx, parents, n)
        return columns(raw, 0, 1), columns(raw, 1, 2)

    def draw_noise(self, rng, n):
        return rng.standard_normal(n)

    def sample(self, store, parents, eps):
        n = eps.shape[0]
        raw = self._eval_head_np(store, parents, n)
        mu, log_sigma = raw[:, 0], raw[:, 1]
        z = mu + np.exp(log_sigma) * eps
        return self.normalizer.denormalize(z)

    def loglk(self, ctx, parents, value):
        n = value_of(value).shape[0]
        mu, log_sigma = self._params(ctx, parents, n)
        mu = reshape(mu, (-1,))
        log_sigma = reshape(log_sigma, (-1,))
        z = self.normalizer.normalize(value)
        d = (z - mu) * exp(-log_sigma)
        return (-0.5 * LOG_2PI - log_sigma - 0.5 * d * d
                + self.normalizer.loglk_correction())

    def abduct(self, store, parents, value, rng):
        n = np.asarray(value).shape[0]
        raw = self._eval_head_np(store, parents, n)
        mu, log_sigma = raw[:, 0], raw[:, 1]
        z = self.normalizer.normalize(np.asarray(value, dtype=np.float64))
        return (z - mu) * np.exp(-log_sigma)


class GLMUnit(NormalUnit):
    """Gaussian node whose (mu, log sigma) are linear in the parents."""

    kind = "glm"

    def __init__(self, name, parent_names=(), hidden=()):
        super().__init__(name, parent_names, hidden=())


class BernoulliUnit(CausalUnit):
    """Binary node: head emits one logit; noise is uniform on [0, 1)."""

    kind = "bernoulli"
    discrete = True
    head_dim = 1
    posterior_kind = "interval"

    def _logit(self, ctx, parents, n):
        return reshape(self.head(ctx, parents, n), (-1,))

    def _p(self, store, parents, n):
        return ad.sigmoid(value_of(self._logit(EvalContext(store), parents, n)))

    def draw_noise(self, rng, n):
        return rng.random(n)

    def sample(self, store, parents, eps):
        p = self._p(store, parents, eps.shape[0])
        return (eps < p).astype(np.float64)

    def loglk(self, ctx, parents, value):
        v = value_of(value)
        if not np.all((v == 0.0) | (v == 1.0)):
            raise UnitError(f"node {self.name!r}: binary value outside {{0,1}}")
        logit = self._logit(ctx, parents, v.shape[0])
        # x log p + (1-x) log(1-p) via stable log-sigmoids
        return -(v * softplus(-logit) + (1.0 - v) * softplus(logit))

    def abduct(self, store, parents, value, rng):
        v = np.asarray(value, dtype=np.float64)
        if not np.all((v == 0.0) | (v == 1.0)):
            raise UnitError(f"node {self.name!r}: binary value outside {{0,1}}")
        p = self._p(store, parents, v.shape[0])
        u = rng.random(v.shape[0])
        # truncated-uniform posterior: x=1 -> U[0,p), x=0 -> U[p,1)
        return np.where(v == 1.0, u * p, p + u * (1.0 - p))


class CategoricalUnit(CausalUnit):
    """K-way node sampled by the Gumbel-max trick; abduction by rejection."""

    kind = "categorical"
    discrete = True
    posterior_kind = "rejection"
    REJECTION_CAP = 10_000

    def __init__(self, name, parent_names=(), hidden=(32, 32), n_classes=2):
        if n_classes < 2:
            raise UnitError(f"node {name!r}: need at least 2 classes")
        self.n_classes = n_classes
        self.head_dim = n_classes
        super().__init__(name, parent_names, hidden)

    def _logits(self, store, parents, n):
        return self._eval_head_np(store, parents, n)

    def _check_classes(self, v):
        if not np.all((v == np.floor(v)) & (v >= 0) & (v < self.n_classes)):
            raise UnitError(f"node {self.name!r}: class index outside "
                            f"[0, {self.n_classes})")

    def draw_noise(self, rng, n):
        u = rng.random((n, self.n_classes))
        return -np.log(-np.log(u))

    def sample(self, store, parents, eps):
        logits = self._logits(store, parents, eps.shape[0])
        return np.argmax(logits + eps, axis=1).astype(np.float64)

    def loglk(self, ctx, parents, value):
        v = value_of(value)
        self._check_classes(v)
        logits = self.head(ctx, parents, v.shape[0])
        lse = logsumexp(logits, axis=1)
        return take_along(logits, v.astype(np.intp)) - lse

    def abduct(self, store, parents, value, rng):
        v = np.asarray(value, dtype=np.float64)
        self._check_classes(v)
        n = v.shape[0]
        logits = self._logits(store, parents, n)
        target = v.astype(np.intp)
        out = np.zeros((n, self.n_classes))
        pending = np.arange(n)
        for _ in range(self.REJECTION_CAP):
            g = -np.log(-np.log(rng.random((pending.size, self.n_classes))))
            hit = np.argmax(logits[pending] + g, axis=1) == target[pending]
            out[pending[hit]] = g[hit]
            pending = pending[~hit]
            if pending.size == 0:
                return out
        raise UnitError(f"node {self.name!r}: abduction rejection cap "
                        f"({self.REJECTION_CAP}) exhausted")


class ALDUnit(CausalUnit):
    """Asymmetric Laplace node: head emits (m, log lambda, log kappa).

    Density (normalized scale): c * exp(-lam*kap*(z-m)) for z >= m and
    c * exp(lam*(z-m)/kap) below, with c = lam/(kap + 1/kap).  Sampling
    and abduction go through the closed-form CDF, so abduction is exact.
    """

    kind = "ald"
    head_dim = 3
    posterior_kind = "exact"

    def _params_np(self, store, parents, n):
        raw = self._eval_head_np(store, parents, n)
        return raw[:, 0], np.exp(raw[:, 1]), np.exp(raw[:, 2])

    def draw_noise(self, rng, n):
        return rng.random(n)

    def sample(self, store, parents, eps):
        m, lam, kap = self._params_np(store, parents, eps.shape[0])
        q = kap * kap / (1.0 + kap * kap)  # mass below the mode
        lo = eps < q
        z = np.where(lo,
                     m + (kap / lam) * np.log(np.maximum(eps, 1e-300) / q),
                     m - np.log((1.0 - eps) / (1.0 - q)) / (lam * kap))
        return self.normalizer.denormalize(z)

    def loglk(self, ctx, parents, value):
        v = value_of(value)
        raw = self.head(ctx, parents, v.shape[0])
        m = reshape(columns(raw, 0, 1), (-1,))
        log_lam = reshape(columns(raw, 1, 2), (-1,))
        log_kap = reshape(columns(raw, 2, 3), (-1,))
        lam = exp(log_lam)
        kap = exp(log_kap)
        z = self.normalizer.normalize(value)
        d = z - m
        above = value_of(d) >= 0.0
        expo = where(above, -lam * kap * d, lam * d * exp(-log_kap))
        # log c = log lam - log(kap + 1/kap) = log lam - logaddexp(log kap, -log kap)
        log_c = log_lam - ad.logaddexp(log_kap, -log_kap)
        return log_c + expo + self.normalizer.loglk_correction()

    def abduct(self, store, parents, value, rng):
        v = np.asarray(value, dtype=np.float64)
        m, lam, kap = self._params_np(store, parents, v.shape[0])
        z = self.normalizer.normalize(v)
        q = kap * kap / (1.0 + kap * kap)
        d = z - m
        return np.where(d < 0.0,
                        q * np.exp(lam * d / kap),
                        1.0 - (1.0 - q) * np.exp(-lam * kap * d))


class ConfounderUnit(CausalUnit):
    """Latent N(0,1) source with no parents and no trainable parameters."""

    kind = "confounder"
    head_dim = 0
    posterior_kind = "latent"

    def __init__(self, name):
        super().__init__(name, ())

    def init_params(self, store, rng):
        pass

    def param_names(self):
        return []

    def draw_noise(self, rng, n):
        return rng.standard_normal(n)

    def sample(self, store, parents, eps):
        return np.asarray(eps, dtype=np.float64)

    def loglk(self, ctx, parents, value):
        z = value_of(value)
        return -0.5 * LOG_2PI - 0.5 * z * z

    def abduct(self, store, parents, value, rng):
        # latent confounders are handled by importance sampling at the
        # graph level, never by per-node inversion
        raise UnitError(f"node {self.name!r}: confounders have no "
                        "per-node noise posterior")
