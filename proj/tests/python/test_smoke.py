import math

import numpy as np
import pytest

import rpsft


def rng(seed=0):
    return np.random.default_rng(seed)


def test_svd_reconstructs():
    a = rng().standard_normal((7, 4))
    u, s, v = rpsft.svd(a)
    assert np.all(np.diff(s) <= 0)
    np.testing.assert_allclose(u @ np.diag(s) @ v.T, a, atol=1e-12)


def test_full_rank_penalty_is_l2():
    r = rng(1)
    w0 = r.standard_normal((5, 5))
    w = r.standard_normal((5, 5))
    b = rpsft.build_basis(w0, 5)
    assert b.k == 5
    assert rpsft.penalty(w, b) == pytest.approx(np.sum((w - w0) ** 2), rel=1e-12)


def test_gradient_matches_finite_difference():
    r = rng(2)
    w0 = r.standard_normal((5, 4))
    b = rpsft.build_basis(w0, 2)
    w = w0 + 0.3 * r.standard_normal((5, 4))
    g = rpsft.penalty_gradient(w, b)
    e = np.zeros_like(w)
    e[1, 2] = 1e-6
    fd = (rpsft.penalty(w + e, b) - rpsft.penalty(w - e, b)) / 2e-6
    assert g[1, 2] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_basis_block_is_diagonal():
    w0 = np.diag([3.0, 2.0, 1.0])
    b = rpsft.build_basis(w0, 2)
    np.testing.assert_array_equal(b.S_ref, np.diag([3.0, 2.0]))
    assert b.sigma_gap == 1.0


def test_flow_matches_closed_form():
    r = rng(3)
    w0 = r.standard_normal((5, 4))
    g = r.standard_normal((5, 4))
    b = rpsft.build_basis(w0, 2)
    times, a, residual = rpsft.integrate_flow(w0, b, g, lam=1.0, t_end=1.0, dt=1e-3)
    gp = b.U_k.T @ g @ b.V_k
    ref = rpsft.closed_form_constant(gp, 1.0, np.zeros((2, 2)), times[-1])
    np.testing.assert_allclose(a[-1], ref, atol=1e-10)
    assert residual < 1e-3


def test_rank_selection():
    r = rng(4)
    g = r.standard_normal((4, 4))
    h = 0.5 + r.random((4, 4))
    c = np.zeros((4, 4))
    c[:2, :2] = r.random((2, 2)) + 0.1
    curves = rpsft.tradeoff_curves(g, h, c, lam=1.0, beta=2.0)
    assert len(curves["Phi"]) == 5
    k_star, q = rpsft.rank_boundary(g, h, c, lam=1.0, beta=2.0)
    assert q == 2 and k_star <= q
    assert rpsft.threshold_decision(1.0, 1.0, 10.0, 1.0, 1.0)
    assert rpsft.rank_from_energy([(1, 0.1), (2, 0.3)], 0.2) == (2, True)


def test_fisher_curve_ends_at_one():
    r = rng(5)
    w = r.standard_normal((5, 5))
    grads = [r.standard_normal((5, 5)) for _ in range(10)]
    curve = rpsft.fisher_energy_curve(grads, w)
    assert curve[-1][2] == pytest.approx(1.0, abs=1e-12)


def test_rotation_and_drift():
    r = rng(6)
    w = r.standard_normal((6, 4))
    assert rpsft.mean_left_rotation(w, w, 3) == 0.0
    base = r.standard_normal((30, 3))
    shifted = base + np.array([1.0, 2.0, 2.0])
    drift = rpsft.hidden_drift([("base", base), ("tuned", shifted)])
    assert drift["tuned"][0] == pytest.approx(3.0, abs=1e-12)
    assert drift["tuned"][1] <= drift["tuned"][0] + 1e-12


def test_entropy_and_bandwidth():
    e = rpsft.sequence_entropies([np.full((3, 4), 0.25), np.eye(4)[:2]])
    assert e[0] == math.log(4.0)
    assert e[1] == 0.0
    assert rpsft.kde_bandwidth(1.0, 32) == 0.53


def test_checkpoint_round_trip(tmp_path):
    a = rng(7).standard_normal((3, 2))
    path = tmp_path / "x.rpsv"
    rpsft.save_checkpoint(path, [("a", a), ("b", np.ones((1, 4)))])
    back = dict(rpsft.load_checkpoint(path))
    np.testing.assert_array_equal(back["a"], a)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(rpsft.FormatError):
        rpsft.load_checkpoint(path)


def test_errors_map_to_python():
    with pytest.raises(rpsft.ParameterError):
        rpsft.build_basis(np.eye(3), 4)
    with pytest.raises(rpsft.ParameterError):
        rpsft.run_preset("nope", "/tmp/rpsft_nope")
    assert "forgetting-tradeoff" in rpsft.preset_names()


def test_preset_runs(tmp_path):
    rpsft.run_preset("gradflow", tmp_path, ["flow.t_end=1"])
    text = (tmp_path / "residual.csv").read_text()
    assert text.startswith("# rpsft gradflow\n")
