"""Surrogate evaluation, offline fitting and the parameter file format."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualctl import (
    FitError,
    RbfNetwork,
    TrainingDataset,
    branch,
    eval_basis,
    eval_network,
    geometry,
    load_network,
    predict_output,
    save_network,
    train_offline,
)


def _unit_network(f_value=1.0, g_value=3.0, at=0.0):
    """Network whose branches evaluate to constants at the point ``at``."""
    f = branch(((at,),), (1.0,), (f_value,))
    g = branch(((at,),), (1.0,), (g_value,))
    return RbfNetwork(f_branch=f, g_branch=g)


def test_basis_is_gaussian_in_squared_width():
    br = branch(((0.0,),), (1.0,), (1.0,))
    assert eval_basis(br, (1.0,))[0] == pytest.approx(math.exp(-0.5), abs=1e-15)
    wide = branch(((0.0,),), (4.0,), (1.0,))
    assert eval_basis(wide, (2.0,))[0] == pytest.approx(math.exp(-0.5), abs=1e-15)


def test_basis_peaks_at_center():
    br = branch(((1.5, -2.0),), (0.7,), (1.0,))
    assert eval_basis(br, (1.5, -2.0))[0] == 1.0


def test_prediction_composes_branches():
    net = _unit_network()
    assert predict_output(net, (1.0, 0.9, 0.0), (0.0,), 2.0) == pytest.approx(6.4, abs=1e-12)


def test_prediction_degenerate_theta_returns_offset():
    net = _unit_network()
    for u in (0.0, 1.0, -7.3):
        assert predict_output(net, (0.0, 0.0, 5.25), (0.0,), u) == 5.25


def test_prediction_zero_input_returns_drift():
    net = _unit_network(f_value=-0.37)
    assert predict_output(net, (1.0, 1.0, 0.0), (0.0,), 0.0) == pytest.approx(-0.37, abs=1e-15)


@given(
    theta=st.tuples(
        st.floats(-2, 2, allow_nan=False),
        st.floats(-2, 2, allow_nan=False),
        st.floats(-2, 2, allow_nan=False),
    ),
    u=st.floats(-10, 10, allow_nan=False),
    x=st.floats(-3, 3, allow_nan=False),
)
@settings(max_examples=150)
def test_prediction_is_affine_in_theta_and_u(theta, u, x):
    net = RbfNetwork(
        f_branch=branch(((-1.0,), (1.0,)), (1.0, 2.0), (0.8, -1.1)),
        g_branch=branch(((0.0,),), (3.6,), (2.2,)),
    )
    fh, gh = eval_network(net, (x,))
    expected = theta[0] * fh + theta[1] * gh * u + theta[2]
    assert predict_output(net, theta, (x,), u) == pytest.approx(expected, abs=1e-12)


def test_offline_fit_recovers_generating_weights():
    rng = np.random.default_rng(3)
    f_geom = geometry(((-1.0,), (0.0,), (1.0,)), (1.0, 1.0, 1.0))
    g_geom = geometry(((-1.0,), (1.0,)), (2.0, 2.0))
    w_f = (0.5, -1.2, 0.9)
    w_g = (1.4, -0.3)
    truth = RbfNetwork(f_branch=branch(f_geom.centers, f_geom.widths, w_f),
                       g_branch=branch(g_geom.centers, g_geom.widths, w_g))
    states = rng.uniform(-2, 2, size=(200, 1))
    inputs = rng.uniform(-2, 2, size=200)
    outputs = np.array([
        predict_output(truth, (1.0, 1.0, 0.0), (s[0],), u)
        for s, u in zip(states, inputs)
    ])
    net, rms = train_offline(
        TrainingDataset(states=states, inputs=inputs, outputs=outputs), f_geom, g_geom
    )
    assert rms < 1e-10
    assert net.f_branch.weights == pytest.approx(w_f, abs=1e-8)
    assert net.g_branch.weights == pytest.approx(w_g, abs=1e-8)


def test_offline_fit_rejects_rank_deficiency_without_ridge():
    # Two bases at the same center are indistinguishable.
    f_geom = geometry(((0.0,), (0.0,)), (1.0, 1.0))
    g_geom = geometry(((0.0,),), (1.0,))
    rng = np.random.default_rng(0)
    states = rng.uniform(-1, 1, size=(50, 1))
    inputs = rng.uniform(-1, 1, size=50)
    outputs = rng.uniform(-1, 1, size=50)
    ds = TrainingDataset(states=states, inputs=inputs, outputs=outputs)
    with pytest.raises(FitError):
        train_offline(ds, f_geom, g_geom)
    # Ridge regularization makes the same problem solvable.
    ds_r = TrainingDataset(states=states, inputs=inputs, outputs=outputs, ridge=1e-6)
    net, _ = train_offline(ds_r, f_geom, g_geom)
    assert all(math.isfinite(w) for w in net.f_branch.weights)


def test_offline_fit_needs_enough_samples():
    f_geom = geometry(((0.0,), (1.0,)), (1.0, 1.0))
    g_geom = geometry(((0.0,),), (1.0,))
    ds = TrainingDataset(states=[[0.0], [1.0]], inputs=[0.0, 1.0], outputs=[0.0, 1.0])
    with pytest.raises(FitError):
        train_offline(ds, f_geom, g_geom)


def test_save_load_roundtrip_is_exact(tmp_path):
    net = RbfNetwork(
        f_branch=branch(((-2.0,), (0.5,)), (1.0, 0.3), (11.2856, -4.6174)),
        g_branch=branch(((0.0,),), (3.6,), (3.5097,)),
    )
    path = tmp_path / "net.rbfnet"
    save_network(net, path, comment="roundtrip fixture\nsecond line")
    loaded = load_network(path)
    assert loaded == net  # repr() serialization is lossless for floats


def test_load_rejects_malformed_files(tmp_path):
    path = tmp_path / "bad.rbfnet"
    path.write_text("rbfnet v9\nstate_dim 1\n")
    with pytest.raises(ValueError, match="header"):
        load_network(path)
    path.write_text(
        "rbfnet v1\nstate_dim 1\nbranch f 2\nbasis 1.0 0.0\nweights 1.0 2.0\n"
    )
    with pytest.raises(ValueError, match="basis"):
        load_network(path)
    path.write_text(
        "rbfnet v1\nstate_dim 1\nbranch f 1\nbasis 1.0 0.0\nweights 1.0\n"
    )
    with pytest.raises(ValueError, match="'f' and 'g'"):
        load_network(path)


def test_bundled_affine_network_matches_frozen_parameters():
    net = load_network("configs/networks/case1_affine.rbfnet")
    f, g = net.f_branch, net.g_branch
    assert f.size == 9 and g.size == 3
    assert f.centers == tuple((c,) for c in (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0))
    assert set(f.widths) == {1.0}
    assert g.centers == ((-2.0,), (0.0,), (2.0,))
    assert set(g.widths) == {3.6}
    assert f.weights == (
        11.2856, -4.6174, -12.3754, 1.5622, 12.0864, 2.2351, -11.9197, -4.4981, 12.6531,
    )
    assert g.weights == (-0.4449, 3.5097, -0.4449)


def test_bundled_affine_network_tracks_plant_nonlinearities():
    from dualctl import affine_f, affine_g

    net = load_network("configs/networks/case1_affine.rbfnet")
    ys = np.linspace(-1.2, 1.2, 61)
    err_f = max(abs(eval_network(net, (y,))[0] - affine_f(y)) for y in ys)
    err_g = max(abs(eval_network(net, (y,))[1] - affine_g(y)) for y in ys)
    # Surrogate quality on the band the reference trajectory occupies;
    # generous bounds, the point is that the file was not corrupted.
    assert err_f < 0.05
    assert err_g < 0.01


def test_bundled_train_network_represents_resistance_curve():
    from dualctl import train_f, train_g

    net = load_network("configs/networks/case4_train.rbfnet")
    vs = np.linspace(295.0, 330.0, 71)
    err_f = max(abs(eval_network(net, (v,))[0] - train_f(v)) for v in vs)
    err_g = max(abs(eval_network(net, (v,))[1] - train_g(v)) for v in vs)
    assert err_f < 0.01
    assert err_g < 1e-4
