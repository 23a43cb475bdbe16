import math

import numpy as np
import pytest

import hop


def test_generate_is_deterministic_and_feasible():
    a = hop.generate("polygon", 40, seed=7)
    b = hop.generate("polygon", 40, seed=7)
    assert len(a) == 40 and a.n_train == 28
    assert a.config_hash == b.config_hash
    for i in range(len(a)):
        assert np.array_equal(a[i].x, b[i].x)
        assert a[i].contains(a[i].y0)
    assert hop.generate("polygon", 40, seed=8).config_hash != a.config_hash


def test_map_round_trip_and_boundary():
    ds = hop.generate("lp", 5, seed=1)
    inst = ds[0]
    v = np.array([0.6, 0.8])
    y = inst.map(v, 0.5)
    assert inst.contains(y)
    v2, z2 = inst.inverse_map(y)
    assert np.allclose(v2, v, atol=1e-10) and abs(z2 - 0.5) < 1e-10
    r = inst.boundary_distance(v)
    edge = inst.y0 + r * v
    assert inst.violation(edge).max() <= 1e-9
    assert not inst.contains(inst.y0 + (r + 1e-4) * v)


def test_train_and_evaluate_hop_is_feasible(tmp_path):
    ds = hop.generate("polygon", 60, seed=2)
    model = hop.train(ds, "hop", epochs=3, batch=16, hidden=16, seed=1)
    assert len(model.history) == 3
    m = model.evaluate(ds, "all")
    assert m["vio_rate"] == 0.0 and m["max_cons"] == 0.0
    y = model.predict(ds[0])
    assert ds[0].contains(y)
    model.save(str(tmp_path / "ckpt.json"))
    ds.save(str(tmp_path / "data.jsonl"))
    back = hop.load_dataset(str(tmp_path / "data.jsonl"))
    assert back.config_hash == ds.config_hash and len(back) == len(ds)
    assert np.array_equal(back[3].x, ds[3].x)


def test_miso_instance_objective_is_negative_wsr():
    ds = hop.generate("miso", 3, seed=4)
    inst = ds[0]
    assert inst.dim == 24
    assert inst.contains(inst.y0)
    assert inst.reported(inst.y0) == pytest.approx(-inst.objective(inst.y0))


def test_gradcheck_and_jacobian():
    ds = hop.generate("highdim", 4, seed=3, dim=5)
    assert hop.gradcheck(ds, 0) <= 1e-5
    v = np.ones(3) / math.sqrt(3)
    assert hop.jacobian_det_numeric(v, 0.7) == pytest.approx(hop.jacobian_det(3, 0.7), rel=1e-6)


def test_polarlab_modes():
    trunc = hop.polarlab("truncate")
    assert trunc.shape == (201, 6)
    assert np.all(trunc[:, 2] == 0.0)
    assert math.hypot(trunc[-1, 3] + 1, trunc[-1, 4]) >= 0.5
    rec = hop.polarlab("reconnect")
    assert rec[-1, 5] <= 1e-6


def test_errors_carry_codes():
    with pytest.raises(hop.HopError, match="invalid_argument"):
        hop.generate("nope", 3)
    with pytest.raises(hop.HopError):
        hop.load_dataset("/nonexistent/file.jsonl")
