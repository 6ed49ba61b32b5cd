import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from sopshift.nn import functional as F
from sopshift.nn import gradcheck as gc
from sopshift.nn.layers import Activation, BatchNorm, Dense, Dropout, Parameter, Sequential, fc_block
from sopshift.nn.optim import make_optimizer
from sopshift.nn.schedules import make_schedule
from sopshift.nn import checkpoint

LIMIT = {"dense_bn_act": 1e-4, "vae_graph": 1e-4}


@pytest.fixture(scope="module")
def suite():
    return gc.run_suite(20, seed=123)


@pytest.mark.parametrize("name", ["dense", "batchnorm", "dense_bn_act", "dropout_eval_path", *F.ACTIVATIONS,
                                  "ce_ls", "focal", "mse", "kl_mu", "kl_logvar", "vae_graph"])
def test_gradients_match_central_differences(suite, name):
    assert suite[name] < LIMIT.get(name, 1e-5)


def test_rel_error_reference_points():
    a = np.array([1.0, 2.0])
    assert gc.rel_error(a, a) == 0.0
    assert gc.rel_error(a, -a) == pytest.approx(1.0)
    assert gc.rel_error(np.zeros(3), np.full(3, 1e-12)) < 1e-5


def test_numerical_grad_of_quadratic():
    x = np.array([1.0, -2.0, 0.5])
    g = gc.numerical_grad(lambda: float((x**2).sum()), x)
    np.testing.assert_allclose(g, 2 * x, atol=1e-8)


# --- closed forms ---------------------------------------------------------------------

def test_kl_closed_forms():
    assert F.gaussian_kl(np.zeros((1, 4)), np.zeros((1, 4)))[0] == 0.0
    assert F.gaussian_kl(np.ones((1, 1)), np.zeros((1, 1)))[0] == pytest.approx(0.5, abs=1e-12)


def test_kl_matches_monte_carlo():
    rng = np.random.default_rng(11)
    mu = rng.normal(0, 0.8, (1, 3))
    lv = rng.normal(0, 0.5, (1, 3))
    z = mu + np.exp(0.5 * lv) * rng.standard_normal((1_000_000, 3))
    log_q = -0.5 * (((z - mu) ** 2) / np.exp(lv) + lv).sum(1)
    log_p = -0.5 * (z**2).sum(1)
    sample = log_q - log_p
    se = sample.std() / math.sqrt(sample.size)
    assert abs(sample.mean() - F.gaussian_kl(mu, lv)[0]) < 3 * se


def test_uniform_logits_give_log3():
    loss, _ = F.cross_entropy(np.zeros((5, 3)), np.array([0, 1, 2, 0, 1]))
    assert loss == pytest.approx(math.log(3), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(z=hnp.arrays(np.float64, (6, 3), elements=st.floats(-20, 20)), t=st.lists(st.integers(0, 2), min_size=6, max_size=6))
def test_focal_gamma0_and_ls_alpha0_equal_ce(z, t):
    t = np.array(t)
    ce, g = F.cross_entropy(z, t)
    fl, gf = F.focal_loss(z, t, 0.0)
    ls, gl = F.softmax_ce_ls(z, t, 0.0)
    assert abs(fl - ce) <= 1e-12 * max(1, ce) and abs(ls - ce) <= 1e-12 * max(1, ce)
    np.testing.assert_allclose(gf, g, atol=1e-12)
    np.testing.assert_allclose(gl, g, atol=1e-12)


def test_reparameterize_moments():
    mu = np.full((100_000, 1), 1.5)
    lv = np.full((100_000, 1), math.log(2.0))
    z, _ = F.reparameterize(mu, lv, rng=0)
    assert abs(z.mean() - 1.5) < 0.03
    assert abs(z.var() - 2.0) < 0.1


def test_reparameterize_frozen_noise():
    mu, lv = np.zeros((2, 3)), np.zeros((2, 3))
    eps = np.ones((2, 3))
    z, e = F.reparameterize(mu, lv, eps=eps)
    np.testing.assert_array_equal(z, eps)
    assert e is eps


# --- properties ------------------------------------------------------------------------

logit_arrays = hnp.arrays(np.float64, (4, 3), elements=st.floats(-1e4, 1e4))
targets = st.lists(st.integers(0, 2), min_size=4, max_size=4).map(np.array)


@settings(max_examples=80, deadline=None)
@given(z=logit_arrays, t=targets, alpha=st.floats(0, 0.15), gamma=st.floats(0.5, 5))
def test_losses_nonnegative_and_finite(z, t, alpha, gamma):
    for loss, grad in (F.softmax_ce_ls(z, t, alpha), F.focal_loss(z, t, gamma)):
        assert np.isfinite(loss) and loss >= 0
        assert np.isfinite(grad).all()


@settings(max_examples=50, deadline=None)
@given(a=hnp.arrays(np.float64, (3, 4), elements=st.floats(-1e3, 1e3)),
       b=hnp.arrays(np.float64, (3, 4), elements=st.floats(-1e3, 1e3)))
def test_mse_and_kl_nonnegative(a, b):
    assert F.mse(a, b)[0] >= 0
    kl = F.gaussian_kl(a, np.clip(b, -20, 20))[0]
    assert kl >= -1e-9 * (1 + np.abs(a).max() ** 2)


def test_activations_reference_values():
    x = np.array([-2.0, 0.0, 1.0])
    np.testing.assert_allclose(F.relu(x), [0, 0, 1])
    np.testing.assert_allclose(F.leaky_relu(x), [-0.02, 0, 1])
    np.testing.assert_allclose(F.elu(x), [math.expm1(-2), 0, 1])
    np.testing.assert_allclose(F.silu(x), x / (1 + np.exp(-x)))
    # tanh-form GELU
    np.testing.assert_allclose(F.gelu(np.array([1.0])), [0.8411919906082768], rtol=1e-12)


def test_eval_mode_is_deterministic():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((16, 5))
    outs = []
    for seed in (1, 2):
        net = Sequential(fc_block(5, 8, "relu", 0.4, np.random.default_rng(7)), Dropout(0.5, seed=seed))
        net.train()
        net.forward(x)  # moves the running statistics
        net.eval()
        outs.append((net.forward(x), net.forward(x)))
    np.testing.assert_array_equal(outs[0][0], outs[0][1])
    np.testing.assert_array_equal(outs[0][0], outs[1][0])


def test_dropout_train_mode_masks_and_rescales():
    d = Dropout(0.5, seed=3)
    d.train()
    y = d.forward(np.ones((1000, 10)))
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05


def test_batchnorm_running_stats_unbiased():
    bn = BatchNorm(2, momentum=1.0)
    x = np.array([[0.0, 1.0], [2.0, 1.0], [4.0, 1.0]])
    bn.train()
    bn.forward(x)
    np.testing.assert_allclose(bn.running_mean, [2.0, 1.0])
    np.testing.assert_allclose(bn.running_var, [4.0, 0.0])
    with pytest.raises(ValueError):
        bn.forward(x[:1])


def test_module_state_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    net = Sequential(fc_block(4, 6, "gelu", 0.1, rng), Dense(6, 3, rng))
    digest = checkpoint.save(net, tmp_path / "n.ckpt", {"what": "test"})
    other = Sequential(fc_block(4, 6, "gelu", 0.1, np.random.default_rng(5)), Dense(6, 3, np.random.default_rng(5)))
    header, arrays = checkpoint.read(tmp_path / "n.ckpt")
    other.load_state(arrays)
    assert header["what"] == "test"
    assert checkpoint.state_digest(other) == digest
    with pytest.raises((KeyError, ValueError)):
        other.load_state({k: v for k, v in list(arrays.items())[1:]})


# --- optimizers --------------------------------------------------------------------------

def run_numpy(kind, w0, grads, lr, wd, momentum):
    p = Parameter(w0.copy())
    opt = make_optimizer(kind, [p], lr, wd, momentum)
    out = []
    for g in grads:
        p.grad[...] = g(p.value)
        opt.step()
        out.append(p.value.copy())
    return np.array(out)


@pytest.mark.parametrize("kind,momentum", [("sgd_nesterov", 0.8), ("adam", None), ("adamw", None),
                                           ("rmsprop", 0.0), ("rmsprop", 0.5)])
def test_optimizers_match_torch(kind, momentum):
    torch = pytest.importorskip("torch")
    w0 = np.array([1.0, -2.0, 0.5])
    A = np.diag([1.0, 3.0, 0.2])
    grad_fn = lambda w: A @ w + 0.1
    lr, wd = 0.05, 0.01
    mine = run_numpy(kind, w0, [grad_fn] * 25, lr, wd, momentum)

    t = torch.tensor(w0, dtype=torch.float64, requires_grad=True)
    if kind == "sgd_nesterov":
        opt = torch.optim.SGD([t], lr=lr, momentum=momentum, nesterov=True, weight_decay=wd)
    elif kind == "adam":
        opt = torch.optim.Adam([t], lr=lr, weight_decay=wd)
    elif kind == "adamw":
        opt = torch.optim.AdamW([t], lr=lr, weight_decay=wd)
    else:
        opt = torch.optim.RMSprop([t], lr=lr, weight_decay=wd, momentum=momentum, alpha=0.99, eps=1e-8)
    ref = []
    At = torch.tensor(A)
    for _ in range(25):
        opt.zero_grad()
        t.grad = (At @ t.detach() + 0.1).clone()
        opt.step()
        ref.append(t.detach().numpy().copy())
    np.testing.assert_allclose(mine, np.array(ref), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("kind", ["sgd_nesterov", "adam", "adamw", "rmsprop"])
def test_optimizers_descend_a_quadratic(kind):
    w = run_numpy(kind, np.array([3.0, -4.0]), [lambda w: 2 * w] * 400, 0.05, 0.0, 0.9 if kind == "sgd_nesterov" else None)
    assert np.linalg.norm(w[-1]) < 0.1


def test_adam_first_step_is_lr_times_sign():
    w = run_numpy("adam", np.array([1.0, 1.0]), [lambda w: np.array([3.0, -0.01])], 0.1, 0.0, None)
    np.testing.assert_allclose(w[0], [0.9, 1.1], atol=1e-6)


def test_unknown_optimizer_and_bad_lr():
    with pytest.raises(ValueError):
        make_optimizer("lion", [Parameter(np.zeros(1))], 0.1)
    with pytest.raises(ValueError):
        make_optimizer("adam", [Parameter(np.zeros(1))], 0.0)


# --- schedules ---------------------------------------------------------------------------

def multipliers(kind, total, **kw):
    s = make_schedule(kind, total, **kw)
    out = [s.multiplier]
    for e in range(total - 1):
        out.append(s.step(e, None))
    return out


def test_cosine_endpoints():
    m = multipliers("cosine", 10)
    assert m[0] == 1.0
    assert m[5] == pytest.approx(0.5)
    np.testing.assert_allclose(m, [0.5 * (1 + math.cos(math.pi * e / 10)) for e in range(10)])


def test_warmup_cosine_ramp():
    m = multipliers("warmup_cosine", 20, warmup=4)
    np.testing.assert_allclose(m[:5], [0.25, 0.5, 0.75, 1.0, 1.0])
    assert all(a >= b for a, b in zip(m[4:], m[5:]))


def test_one_cycle_shape():
    m = multipliers("one_cycle", 10)
    assert m[0] == pytest.approx(1 / 25)
    assert max(m) == pytest.approx(1.0)
    assert m.index(max(m)) == 3
    assert 1 / 25 < m[-1] < 0.2


def test_plateau_halves_after_patience():
    s = make_schedule("plateau", 100, patience=2)
    vals = [0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6]
    mult = [s.step(i, v) for i, v in enumerate(vals)]
    assert mult == [1, 1, 1, 1, 0.5, 0.5, 0.5, 0.25]


def test_log_softmax_stable_for_huge_logits():
    z = np.array([[1e4, -1e4, 0.0], [-1e4, -1e4, -1e4]])
    lp = F.log_softmax(z)
    assert np.isfinite(lp).all()
    np.testing.assert_allclose(np.exp(lp).sum(1), 1.0)


def test_activation_rejects_unknown_kind():
    with pytest.raises(ValueError):
        Activation("tanh")
