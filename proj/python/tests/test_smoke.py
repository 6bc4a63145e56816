import math
import os
import subprocess

import numpy as np
import pytest

import icpcov


def test_version():
    assert icpcov.__version__ == "0.1.0"


def test_exp_log_roundtrip_and_adjoint():
    rng = np.random.default_rng(0)
    for _ in range(50):
        xi = np.concatenate([rng.normal(size=3), rng.uniform(-1, 1, size=3)])
        T = icpcov.exp_se3(xi)
        assert T.shape == (4, 4)
        np.testing.assert_allclose(icpcov.log_se3(T), xi, atol=1e-10)
    T = icpcov.exp_se3(np.array([1.0, 2.0, 3.0, 0.1, -0.2, 0.3]))
    xi = np.array([0.3, -0.1, 0.2, 0.05, 0.02, -0.04])
    lhs = icpcov.log_se3(T @ icpcov.exp_se3(xi) @ np.linalg.inv(T))
    np.testing.assert_allclose(lhs, icpcov.adjoint(T) @ xi, atol=1e-10)


def test_angle_near_pi_raises_with_code():
    T = icpcov.exp_se3(np.array([0, 0, 0, 0, 0, math.pi]))
    with pytest.raises(icpcov.IcpcovError) as info:
        icpcov.log_se3(T)
    assert info.value.args[1] == "AngleNearPi"


def test_cloud_helpers():
    pts = icpcov.synth_scene("room", seed=1, point_density=5.0)
    assert pts.ndim == 2 and pts.shape[1] == 3 and len(pts) > 1000
    down = icpcov.voxel_downsample(pts, 0.5)
    assert 0 < len(down) < len(pts)
    normals = icpcov.estimate_normals(down)
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-9)
    assert icpcov.extract_features(down).shape == (121,)


def test_icp_recovers_small_offset():
    target = icpcov.voxel_downsample(icpcov.synth_scene("room", seed=2, point_density=10.0), 0.2)
    init = icpcov.exp_se3(np.array([0.3, -0.2, 0.05, 0.0, 0.0, 0.05]))
    r = icpcov.icp(target, target, init)
    assert r["converged"]
    np.testing.assert_allclose(r["pose"], np.eye(4), atol=1e-6)


def test_mc_covariance_is_spd():
    scene = icpcov.synth_scene("room", seed=3, point_density=5.0)
    scan = icpcov.voxel_downsample(scene, 0.3)
    out = icpcov.mc_covariance(scan, icpcov.voxel_downsample(scene, 0.5), n_samples=8, seed=1)
    Y = out["label"]
    np.testing.assert_array_equal(Y, Y.T)
    assert np.linalg.eigvalsh(Y).min() >= -1e-12 * np.trace(Y)
    assert 2 <= out["n_converged"] <= 8


def test_loss_helpers():
    A = np.eye(6)
    A[0, 0] = 2.0
    assert icpcov.kl_divergence(A, np.eye(6)) == pytest.approx(0.15343, abs=1e-5)
    assert icpcov.huber(2.0, 1.0) == 1.5
    w = icpcov.sampling_weights([np.diag([1.0, 0, 0, 0, 0, 0]), np.diag([3.0, 0, 0, 0, 0, 0])], 0.0)
    np.testing.assert_allclose(w, [0.25, 0.75])
    assert icpcov.metric_kl(np.eye(6), np.eye(6)) == 0.0


def test_filter_and_metrics_on_straight_line():
    n = 300
    poses = []
    for k in range(n):
        T = np.eye(4)
        T[0, 3] = 0.1 * k
        poses.append(T)
    fused = icpcov.run_filter([0.1 * k for k in range(n)], poses, [np.eye(6) * 1e-4] * n)
    assert len(fused) == n
    ape = icpcov.metric_ape(fused, poses, 200)
    assert len(ape) == 2 and max(ape) < 1e-2
    assert len(icpcov.metric_rpe(fused, poses)) == 2


def test_cli_exit_codes(tmp_path):
    assert icpcov.cli(["--version"]) == 0
    assert icpcov.cli(["no-such-command"]) == 1
    assert icpcov.cli(["eval", "--input", str(tmp_path / "missing.txt"), "--gt", str(tmp_path / "gt.txt"),
                       "--out", str(tmp_path / "r.csv")]) == 2


def test_model_roundtrip(tmp_path):
    exe = os.environ.get("ICPCOV_CLI")
    if not exe:
        pytest.skip("CLI executable not provided")
    run = lambda *a: subprocess.run([exe, *a], check=True, capture_output=True)
    run("synth", "--kind", "kitti", "--frames", "21", "--seed", "4", "--out", str(tmp_path / "k"))
    run("dataset", "--input", str(tmp_path / "k"), "--seq", "00", "--scenario", "slam", "--stride", "10",
        "--samples", "4", "--out", str(tmp_path / "ds.jsonl"))
    run("train", "--input", str(tmp_path / "ds.jsonl"), "--split", "all", "--epochs", "2", "--scan-voxel", "0.5",
        "--out", str(tmp_path / "m.bin"))
    model = icpcov.Model.load(str(tmp_path / "m.bin"))
    scan = icpcov.voxel_downsample(icpcov.synth_scene("tunnel", seed=5, point_density=5.0), 0.5)
    Y = model.predict(scan)
    np.testing.assert_array_equal(Y, Y.T)
    assert np.linalg.eigvalsh(Y).min() > 0.0
    model.save(str(tmp_path / "m2.bin"))
    assert (tmp_path / "m.bin").read_bytes() == (tmp_path / "m2.bin").read_bytes()
