"""Flow checks: identity/affine special cases, logdet, inversion, density."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from deepcausal import autodiff as ad
from deepcausal import flows as F
from deepcausal.units import Normalizer, UnitError


def identity_raw(n, k=1, layers=1):
    # exact identity parameters: slope 1, offset 0, any (here equal) weights
    row = np.concatenate([np.full(k, F.A_HAT_IDENTITY),
                          np.zeros(k), np.zeros(k)])
    return [np.tile(row, (n, 1)) for _ in range(layers)]


def random_raw(rng, n, k, layers, spread=1.0):
    """One random parameter row tiled over n points (x varies, params fixed)."""
    rows = []
    for _ in range(layers):
        row = np.concatenate([
            F.A_HAT_IDENTITY + spread * rng.standard_normal(k),
            spread * rng.standard_normal(k),
            spread * rng.standard_normal(k)])
        rows.append(np.tile(row, (n, 1)))
    return rows


def make_ncf(n_parents, seed=0, scatter=0.0, **kw):
    unit = F.NCFUnit("y", tuple(f"p{i}" for i in range(n_parents)), **kw)
    store = ad.ParamStore()
    rng = np.random.default_rng(seed)
    unit.init_params(store, rng)
    if scatter:
        for name in unit.param_names():
            store[name] = store[name] + scatter * rng.standard_normal(store[name].shape)
    return unit, store


def test_identity_layer_is_identity():
    x = np.linspace(-8, 8, 41)
    eps, logdet = F.dsf_forward(x, identity_raw(41), k=1)
    np.testing.assert_allclose(eps, x, atol=1e-9)
    np.testing.assert_allclose(logdet, 0.0, atol=1e-9)


def test_identity_holds_for_any_mixture_weights():
    # with every slope 1 and bias 0, logit(sum w_k sigmoid(x)) = x for any w
    rng = np.random.default_rng(3)
    k = 8
    row = np.concatenate([np.full(k, F.A_HAT_IDENTITY), np.zeros(k),
                          rng.standard_normal(k)])
    x = np.linspace(-6, 6, 25)
    eps, logdet = F.dsf_forward(x, [np.tile(row, (25, 1))], k=k)
    np.testing.assert_allclose(eps, x, atol=1e-9)
    np.testing.assert_allclose(logdet, 0.0, atol=1e-9)


def test_affine_layer_scales_by_two():
    row = np.array([[F.inv_softplus(2.0 - 1e-4), 0.0, 0.0]])
    x = np.array([1.0])
    eps, logdet = F.dsf_forward(x, [row], k=1)
    assert eps[0] == pytest.approx(2.0, abs=1e-9)
    assert logdet[0] == pytest.approx(math.log(2.0), abs=1e-9)
    back = F.dsf_inverse(np.array([2.0]), [row], k=1)
    assert back[0] == pytest.approx(1.0, abs=1e-9)


def test_logdet_matches_finite_difference():
    rng = np.random.default_rng(17)
    for trial in range(4):
        raws = random_raw(rng, 50, k=6, layers=2)
        x = rng.standard_normal(50) * 2.0
        _, logdet = F.dsf_forward(x, raws, k=6)
        h = 1e-5
        fp, _ = F.dsf_forward(x + h, raws, k=6)
        fm, _ = F.dsf_forward(x - h, raws, k=6)
        fd = (fp - fm) / (2 * h)
        np.testing.assert_allclose(np.exp(logdet), fd, rtol=1e-4)


def test_forward_is_strictly_increasing():
    rng = np.random.default_rng(23)
    x = np.linspace(-12, 12, 400)
    for trial in range(5):
        raws = random_raw(rng, 400, k=8, layers=2, spread=2.0)
        eps, _ = F.dsf_forward(x, raws, k=8)
        assert np.all(np.diff(eps) > 0)


def test_inverse_roundtrip_random_stacks():
    rng = np.random.default_rng(29)
    for trial in range(10):
        raws = random_raw(rng, 10, k=4, layers=2)
        x = rng.standard_normal(10) * 2.0
        eps, _ = F.dsf_forward(x, raws, k=4)
        back = F.dsf_inverse(eps, raws, k=4)
        np.testing.assert_allclose(back, x, atol=1e-8)
        again, _ = F.dsf_forward(back, raws, k=4)
        np.testing.assert_allclose(again, eps, atol=1e-10)


def test_inverse_range_error_beyond_saturation():
    # the clamp caps each layer's output near logit(1 - 1e-7) ~ 16.1, so
    # a single-layer target of 40 is unreachable
    with pytest.raises(F.FlowError, match="inversion-range"):
        F.dsf_inverse(np.array([40.0]), identity_raw(1), k=1)


def test_identity_initialized_unit_is_near_standard_normal():
    # init sits close to N(0, 1) but not exactly on it: the deliberate
    # per-component spread (see identity_layer_bias) keeps gradients alive
    unit, store = make_ncf(0)
    xs = np.linspace(-3, 3, 101)
    ll = unit.loglk(ad.EvalContext(store), np.zeros((101, 0)), xs)
    dev = np.abs(ll - stats.norm.logpdf(xs))
    assert dev.max() < 0.2
    assert dev[np.abs(xs) <= 1.5].max() < 0.1

    # averaged over standard-normal draws the nll matches the entropy
    draws = np.random.default_rng(1).standard_normal(20000)
    lld = unit.loglk(ad.EvalContext(store), np.zeros((20000, 0)), draws)
    assert -lld.mean() == pytest.approx(np.log(2 * np.pi * np.e) / 2,
                                        abs=0.02)

    # with a normalizer attached, density shifts by change of variables
    shifted = F.NCFUnit("y")
    shifted.normalizer = Normalizer(m=100.0, s=25.0)
    store2 = ad.ParamStore()
    shifted.init_params(store2, np.random.default_rng(0))
    ll2 = shifted.loglk(ad.EvalContext(store2), np.zeros((101, 0)),
                        100.0 + 25.0 * xs)
    np.testing.assert_allclose(ll2, ll - np.log(25.0), atol=1e-12)


def test_identity_init_gradient_is_nonzero_off_gaussian():
    # regression: a fully symmetric init is a critical point of the loss on
    # any standardized data, so training could never leave the affine family
    unit, store = make_ncf(0)
    x = np.random.default_rng(7).gamma(2.0, 1.0, 4000)
    x = (x - x.mean()) / x.std()
    tape = ad.Tape()
    ll = unit.loglk(ad.TapeContext(tape, store), np.zeros((4000, 0)), x)
    grads = tape.backward(-ad.vmean(ll))
    norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    assert norm > 1e-3


def test_density_integrates_to_one():
    unit, store = make_ncf(2, seed=7, scatter=0.2)
    parents = np.tile([[0.8, -0.4]], (8001, 1))
    xs = np.linspace(-10, 10, 8001)
    ll = unit.loglk(ad.EvalContext(store), parents, xs)
    total = integrate.simpson(np.exp(ll), x=xs)

    # the window must cover the support: +-10 maps deep into the base tails
    edges = unit.abduct(store, parents[:2], np.array([-10.0, 10.0]),
                        np.random.default_rng(0))
    assert edges[0] < -3.5 and edges[1] > 3.5
    assert total == pytest.approx(1.0, abs=1e-3)

    # change-of-variables exactness: window mass equals base-measure mass
    # of the mapped interval, at any parameter scatter
    unit2, store2 = make_ncf(2, seed=7, scatter=0.6)
    ll2 = unit2.loglk(ad.EvalContext(store2), parents, xs)
    total2 = integrate.simpson(np.exp(ll2), x=xs)
    e2 = unit2.abduct(store2, parents[:2], np.array([-10.0, 10.0]),
                      np.random.default_rng(0))
    want = stats.norm.cdf(e2[1]) - stats.norm.cdf(e2[0])
    assert total2 == pytest.approx(want, abs=1e-6)


def test_abduct_sample_duality():
    unit, store = make_ncf(1, seed=11, scatter=0.4)
    unit.normalizer = Normalizer(m=3.0, s=1.7)
    rng = np.random.default_rng(5)
    parents = rng.standard_normal((200, 1))
    eps = unit.draw_noise(rng, 200)
    x = unit.sample(store, parents, eps)
    back = unit.abduct(store, parents, x, rng)
    np.testing.assert_allclose(back, eps, atol=1e-7)


def test_loglk_parent_gradients_match_fd():
    unit, store = make_ncf(2, seed=19, scatter=0.3)
    rng = np.random.default_rng(6)
    p0 = rng.standard_normal((5, 2))
    value = rng.standard_normal(5)

    tape = ad.Tape()
    leaf = tape.leaf(p0)
    out = ad.vsum(unit.loglk(ad.TapeContext(tape, store), leaf, value))
    tape.backward(out)
    got = tape.adjoint(leaf)

    def f(arr):
        return float(np.sum(unit.loglk(ad.EvalContext(store), arr, value)))

    h = 1e-6
    fd = np.zeros_like(p0)
    for i in range(p0.shape[0]):
        for j in range(p0.shape[1]):
            pp, pm = p0.copy(), p0.copy()
            pp[i, j] += h
            pm[i, j] -= h
            fd[i, j] = (f(pp) - f(pm)) / (2 * h)
    np.testing.assert_allclose(got, fd, rtol=1e-4, atol=1e-8)


def test_conditioning_matters_after_training():
    # y strongly depends on x; after a short fit the conditional density
    # of the same y must differ across parent values
    rng = np.random.default_rng(37)
    n = 2000
    x = rng.standard_normal(n)
    y = 1.5 * x + 0.3 * rng.standard_normal(n)

    unit, store = make_ncf(1, seed=41)
    unit.normalizer = Normalizer.fit(y)
    unit.set_parent_stats(np.array([x.mean()]), np.array([x.std()]))
    parents = x.reshape(-1, 1)
    for _ in range(150):
        tape = ad.Tape()
        nll = -ad.vmean(unit.loglk(ad.TapeContext(tape, store), parents, y))
        grads = tape.backward(nll)
        ad.adam_step(store, grads, lr=5e-3)

    ctx = ad.EvalContext(store)
    same_y = np.array([1.5])
    ll_hi = unit.loglk(ctx, np.array([[1.0]]), same_y)[0]
    ll_lo = unit.loglk(ctx, np.array([[-1.0]]), same_y)[0]
    assert ll_hi > ll_lo + 0.5
