import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vciedit.denoiser import GMMDenoiser, GMMSpec, Mixture, two_class_gmm
from vciedit.editor import (
    EditRequest,
    GuidanceConfig,
    blend_edit_noise,
    consistent_noise,
    ddim_inversion_edit,
    run_edit,
    sdedit,
    vci_edit,
)
from vciedit.errors import ConfigurationError, DomainError
from vciedit.metrics import EmbeddingSet, FeatureEmbedder, alignment_score, feature_distance, frechet_distance
from vciedit.sampler import RngStream, estimate_x0, forward_marginal, sample
from vciedit.schedule import SigmaPolicy, build_schedule, select_timesteps

DESK = build_schedule("scaled_linear", 1000, 0.00085, 0.012)


def random_gmm(rng, dim):
    classes = {}
    for label in range(int(rng.integers(2, 4))):
        k = int(rng.integers(1, 4))
        w = rng.dirichlet(np.ones(k))
        classes[label] = Mixture(w / w.sum(), rng.normal(0, 2, (k, dim)), rng.uniform(0.1, 1.5, k))
    return GMMSpec(classes)


def test_consistent_noise_examples(tiny):
    x0 = np.array([1.0, 0.0])
    np.testing.assert_allclose(consistent_noise(math.sqrt(0.72) * x0, x0, 2, tiny), 0.0, atol=1e-15)
    np.testing.assert_allclose(consistent_noise(np.array([0.848528, 0.529150]), x0, 2, tiny), [0.0, 1.0], atol=1e-6)
    with pytest.raises(DomainError):
        consistent_noise(x0, x0, 0, tiny)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.integers(1, 1000))
def test_consistent_noise_reconstructs(seed, t):
    rng = np.random.Generator(np.random.Philox(seed))
    x0, xt = rng.standard_normal((2, 6))
    eps = consistent_noise(xt, x0, t, DESK)
    scale = 1.0 + np.max(np.abs(xt)) / math.sqrt(DESK.alpha_bar(t))
    np.testing.assert_allclose(estimate_x0(xt, t, eps, DESK), x0, atol=1e-12 * scale)


def test_blend_examples():
    d, c = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    np.testing.assert_allclose(blend_edit_noise(d, c, 0.61, "control_vci"), [0.431335, 0.792401], atol=1e-6)
    assert np.array_equal(blend_edit_noise(np.array([3.0, -1.0]), c, 0.0, "control_vci"), c)
    np.testing.assert_allclose(blend_edit_noise(d, c, 1.0, "control_vci"), d / math.sqrt(2))
    np.testing.assert_allclose(blend_edit_noise(d, c, 0.3, "vci"), d + c)
    for bad in (-0.1, 1.01):
        with pytest.raises(DomainError):
            blend_edit_noise(d, c, bad, "control_vci")


def test_blend_second_moment(rng):
    n = 100_000
    src, tgt, cons = rng.standard_normal((3, n))
    for phi in (0.0, 0.3, 0.61, 1.0):
        assert 0.95 <= np.var(blend_edit_noise(tgt - src, cons, phi, "control_vci")) <= 1.05


def test_request_validation():
    grid = select_timesteps(1000, 8)
    with pytest.raises(DomainError):
        EditRequest(np.zeros(2), 0, 1, grid, phi=1.5)
    with pytest.raises(ConfigurationError):
        EditRequest(np.zeros(2), 0, 1, grid, mode="sdedit")
    with pytest.raises(ConfigurationError):
        EditRequest(np.zeros(2), 0, 1, grid, mode="control_vci", t_start=500)
    with pytest.raises(ConfigurationError):
        EditRequest(np.zeros(2), 0, 1, grid, mode="bogus")
    with pytest.raises(ConfigurationError):
        GuidanceConfig(-1.0, 2.0)
    assert EditRequest(np.zeros(2), 0, 1, grid, mode="control-vci").mode == "control_vci"


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_phi_zero_reconstructs(seed):
    rng = np.random.Generator(np.random.Philox(seed))
    dim = int(rng.integers(2, 17))
    g = random_gmm(rng, dim)
    labels = list(g.classes)
    x0 = g.mixture(labels[0]).sample(rng, 1)[0]
    req = EditRequest(
        x0, labels[0], labels[-1], select_timesteps(1000, int(rng.integers(4, 21))),
        mode="control_vci", phi=0.0, guidance=GuidanceConfig(3.0, 15.0), seed=int(rng.integers(2**31)),
    )
    res = vci_edit(req, GMMDenoiser(g, DESK), DESK)
    assert np.max(np.abs(res.output - x0)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_same_prompt_vci_reconstructs(seed):
    rng = np.random.Generator(np.random.Philox(seed))
    dim = int(rng.integers(2, 17))
    g = random_gmm(rng, dim)
    c = int(rng.choice(list(g.classes)))
    w = float(rng.uniform(1.0, 10.0))
    x0 = g.mixture(c).sample(rng, 1)[0]
    req = EditRequest(x0, c, c, select_timesteps(1000, 8), mode="vci", guidance=GuidanceConfig(w, w), seed=seed)
    res = vci_edit(req, GMMDenoiser(g, DESK), DESK)
    assert np.max(np.abs(res.output - x0)) <= 1e-8


def test_vci_edit_nfe_and_log():
    g = two_class_gmm(4, 2.0, 0.5)
    req = EditRequest(np.ones(4), 0, 1, select_timesteps(1000, 8), phi=0.61)
    res = vci_edit(req, GMMDenoiser(g, DESK), DESK)
    assert res.nfe == 32
    assert [row[0] for row in res.per_step_log] == list(req.grid.steps)
    assert res.log_csv().startswith("t,delta_norm,cons_norm,edit_norm,edit_var\n1000,")
    unguided = EditRequest(np.ones(4), 0, 1, req.grid, phi=0.61, guidance=GuidanceConfig(1.0, 1.0))
    assert vci_edit(unguided, GMMDenoiser(g, DESK), DESK).nfe == 16


def test_vci_edit_is_seeded():
    g = two_class_gmm(4, 2.0, 0.5)
    den = GMMDenoiser(g, DESK)
    req = EditRequest(np.ones(4), 0, 1, select_timesteps(1000, 8), seed=11)
    assert vci_edit(req, den, DESK).output.tobytes() == vci_edit(req, den, DESK).output.tobytes()


def test_edit_moves_towards_target_class():
    # overlapping classes; strongly separated ones overshoot at w_tgt=15
    g = two_class_gmm(8, 0.5, 1.0)
    den = GMMDenoiser(g, DESK)
    emb = FeatureEmbedder(8, seed=0)
    grid = select_timesteps(1000, 8)
    gen = lambda s: np.random.Generator(np.random.Philox(s))
    a_in, a_out, fd_edit, fd_fresh = [], [], [], []
    for s in range(100):
        x0 = g.mixture(0).sample(gen(1000 + s), 1)[0]
        fresh = g.mixture(1).sample(gen(5000 + s), 1)[0]
        req = EditRequest(x0, 0, 1, grid, phi=0.61, guidance=GuidanceConfig(3.0, 15.0), seed=s + 7)
        out = vci_edit(req, den, DESK).output
        a_in.append(alignment_score(g, x0, 1))
        a_out.append(alignment_score(g, out, 1))
        fd_edit.append(feature_distance(emb, out, x0))
        fd_fresh.append(feature_distance(emb, fresh, x0))
    assert np.mean(a_out) > np.mean(a_in)
    assert np.mean(fd_edit) < np.mean(fd_fresh)


def test_sdedit_zero_start_is_identity():
    g = two_class_gmm()
    x0 = np.array([-2.0, 0.5])
    res = sdedit(EditRequest(x0, 0, 1, select_timesteps(1000, 50), mode="sdedit", t_start=0), GMMDenoiser(g, DESK), DESK)
    assert np.array_equal(res.output, x0) and res.nfe == 0


def test_sdedit_off_grid_start_and_bounds():
    g = two_class_gmm()
    den = GMMDenoiser(g, DESK)
    grid = select_timesteps(1000, 50)
    res = sdedit(EditRequest(np.zeros(2), 0, 1, grid, mode="sdedit", t_start=510, guidance=GuidanceConfig(1.0, 1.0)), den, DESK)
    assert res.nfe == 1 + 25
    with pytest.raises(ConfigurationError):
        sdedit(EditRequest(np.zeros(2), 0, 1, grid, mode="sdedit", t_start=1001), den, DESK)


def test_sdedit_full_start_matches_prior_sampling():
    g = two_class_gmm(2, 2.0, 0.25)
    den = GMMDenoiser(g, DESK)
    grid = select_timesteps(1000, 20)
    x0 = np.array([-2.0, 0.0])
    outs = np.stack([
        sdedit(EditRequest(x0, 0, 1, grid, mode="sdedit", t_start=1000, guidance=GuidanceConfig(1.0, 1.0), seed=s), den, DESK).output
        for s in range(1000)
    ])
    ref, _ = sample(den, DESK, grid, SigmaPolicy("ddpm"), 1, 1.0, RngStream(99), (1000, 2), record=False)
    assert frechet_distance(EmbeddingSet.fit(outs), EmbeddingSet.fit(ref)) <= 0.05
    mean, cov = g.mixture(1).moments()
    assert frechet_distance(EmbeddingSet.fit(outs), EmbeddingSet(mean, cov)) <= 0.05


def test_sdedit_distance_grows_with_start():
    g = two_class_gmm(8, 4.0, 1.0)
    den = GMMDenoiser(g, DESK)
    emb = FeatureEmbedder(8, seed=0)
    grid = select_timesteps(1000, 50)
    means = []
    for t_start in (250, 500, 750):
        d = []
        for s in range(100):
            x0 = g.mixture(0).sample(np.random.Generator(np.random.Philox(s)), 1)[0]
            req = EditRequest(x0, 0, 1, grid, mode="sdedit", t_start=t_start, guidance=GuidanceConfig(1.0, 1.0), seed=s)
            d.append(feature_distance(emb, sdedit(req, den, DESK).output, x0))
        means.append(np.mean(d))
    assert means[0] <= means[1] <= means[2]


def test_ddim_inversion_edit():
    g = two_class_gmm()
    lin = build_schedule("linear", 1000, 1e-4, 0.02)
    den = GMMDenoiser(g, lin)
    grid = select_timesteps(1000, 200)
    x0 = np.array([-2.1, 0.6])
    same = EditRequest(x0, 0, 0, grid, mode="ddim_inversion", t_start=1000, guidance=GuidanceConfig(1.0, 1.0))
    res = ddim_inversion_edit(same, den, lin)
    assert np.linalg.norm(res.output - x0) / np.linalg.norm(x0) <= 0.05
    assert res.nfe == 400
    noop = EditRequest(x0, 0, 1, grid, mode="ddim_inversion", t_start=0)
    res = ddim_inversion_edit(noop, den, lin)
    assert np.array_equal(res.output, x0) and res.nfe == 0
    partial = EditRequest(x0, 0, 1, grid, mode="ddim_inversion", t_start=800)
    assert run_edit(partial, den, lin).nfe == (160 + 160) * 2


def test_mode_dispatch_errors():
    g = two_class_gmm()
    den = GMMDenoiser(g, DESK)
    req = EditRequest(np.zeros(2), 0, 1, select_timesteps(1000, 8))
    with pytest.raises(ConfigurationError):
        sdedit(req, den, DESK)
    with pytest.raises(ConfigurationError):
        ddim_inversion_edit(req, den, DESK)
