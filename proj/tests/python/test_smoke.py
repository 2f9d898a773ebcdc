"""Python smoke tests for the compiled module."""

import math

import numpy as np
import pytest

import shprobe


def test_eval_sh_reference_values():
    assert shprobe.eval_sh(0, 0, (0.0, 0.0, 1.0)) == pytest.approx(
        1.0 / (2.0 * math.sqrt(math.pi)), abs=1e-14
    )
    assert shprobe.eval_sh(1, 0, (0.0, 0.0, 1.0)) == pytest.approx(
        math.sqrt(3.0 / (4.0 * math.pi)), abs=1e-14
    )
    assert shprobe.eval_sh(2, 0, (1.0, 0.0, 0.0)) == pytest.approx(
        -0.5 * math.sqrt(5.0 / (4.0 * math.pi)), abs=1e-14
    )


def test_addition_theorem():
    rng = np.random.default_rng(3)
    for _ in range(20):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        feats = np.asarray(shprobe.feature_vector(8, tuple(v)))
        for l in range(9):
            band = feats[l * l : (l + 1) * (l + 1)]
            assert np.sum(band**2) == pytest.approx(
                (2 * l + 1) / (4 * math.pi), abs=1e-11
            )


def test_gaunt_selection_rules_and_constant():
    table = shprobe.GauntTable(4)
    assert table.coefficient(1, 0, 1, 0, 3, 0) == 0.0  # parity
    assert table.coefficient(1, 1, 1, -1, 4, 0) == 0.0  # triangle
    assert table.coefficient(0, 0, 3, 2, 3, 2) == pytest.approx(
        1.0 / (2.0 * math.sqrt(math.pi)), abs=1e-13
    )


def test_span_rank_law():
    table = shprobe.GauntTable(6)
    assert shprobe.span_rank(1, 2, 2, table) == 5
    assert shprobe.span_rank(1, 2, 3, table) == 0
    assert shprobe.weight_multiplicity(2, 3) == 1


def test_injection_rotation_invariance_and_forces():
    rng = np.random.default_rng(11)
    positions = 2.0 * rng.normal(size=(6, 3))
    spec = shprobe.InjectionSpec.make(
        l_inj=3, alpha=1.2, i=0, j=1, k=2, a=4, coeff_seed=9
    )
    e0 = shprobe.injected_energy(positions, spec)

    theta = 0.7
    q = np.array(
        [
            [math.cos(theta), -math.sin(theta), 0.0],
            [math.sin(theta), math.cos(theta), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    assert shprobe.injected_energy(positions @ q.T, spec) == pytest.approx(
        e0, abs=1e-11
    )

    forces = np.asarray(shprobe.injected_forces(positions, spec))
    assert np.abs(forces.sum(axis=0)).max() < 1e-9

    h = 1e-5
    fd = np.zeros_like(forces)
    for i in range(positions.shape[0]):
        for c in range(3):
            up = positions.copy()
            up[i, c] += h
            down = positions.copy()
            down[i, c] -= h
            fd[i, c] = -(
                shprobe.injected_energy(up, spec)
                - shprobe.injected_energy(down, spec)
            ) / (2 * h)
    assert np.abs(forces - fd).max() / np.abs(forces).max() < 1e-6


def test_probe_span_limits():
    dirs = shprobe.sample_directions(1200, 5)
    y_in = [shprobe.eval_sh(3, 1, d) for d in dirs]
    res = shprobe.fit_poly_probe(dirs, y_in, L=2, d=2)
    assert res.r_squared > 0.999

    _, coeffs = shprobe.synth_target(5, 17)
    y_out = [shprobe.synthesize([0.0] * 25 + list(coeffs), d) for d in dirs]
    res_out = shprobe.fit_poly_probe(dirs, y_out, L=2, d=2)
    assert res_out.r_squared < 0.06


def test_metric_suite():
    rho, delta = shprobe.recovery_fraction(0.166, 0.134, 0.132)
    assert rho == pytest.approx(0.9411764, abs=1e-6)
    assert delta == pytest.approx(0.032, abs=1e-12)

    rho_undef, delta_undef = shprobe.recovery_fraction(0.337, 0.3, 0.43)
    assert rho_undef is None
    assert delta_undef == pytest.approx(0.037)

    assert shprobe.sharpness(0.913, 0.078) == pytest.approx(11.705, abs=1e-3)

    mean, lo, hi = shprobe.bootstrap_mean_ci([0.1, 0.3, 0.2, 0.4], 2000, 42)
    mean2, lo2, hi2 = shprobe.bootstrap_mean_ci([0.1, 0.3, 0.2, 0.4], 2000, 42)
    assert (mean, lo, hi) == (mean2, lo2, hi2)

    contrast = shprobe.cluster_bootstrap_contrast(
        [0.194, 0.036, 0.283, 0.056], [0.043, 0.009, 0.021, 0.026], 5000, 42
    )
    assert contrast["ratio"] == pytest.approx(5.747, abs=1e-2)


def test_bandwidth_shell_oracle():
    positions = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 2.5]])
    coeffs, count, empty = shprobe.neighbor_density_coeffs(positions, 0)
    assert count == 1 and not empty
    w, lstar, undefined = shprobe.bandwidth_lstar(coeffs, 0.95)
    assert not undefined
    assert lstar == 10
    for l in range(11):
        assert w[l] == pytest.approx((2 * l + 1) / 121.0, abs=1e-12)


def test_spn_gradient_check():
    table = shprobe.GauntTable(2)
    batch = [shprobe.SpnFeatures.random(2, 2, 100 + i) for i in range(4)]
    targets = [0.5, -0.2, 0.1, 0.9]
    params = shprobe.spn_init(
        d_r=2, l_max_feat=2, channels=2, l_out=2, activation="silu", seed=3,
        theta_hidden=[8], phi_hidden=[8],
    )
    max_rel, checked = shprobe.spn_gradient_check(
        batch, targets, params, table, probes=5, seed=7
    )
    assert checked >= 5
    assert max_rel < 1e-5


def test_trajectory_roundtrip(tmp_path):
    cfg = shprobe.Configuration()
    cfg.positions = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.5, 0.0]])
    cfg.forces = np.zeros((3, 3))
    cfg.energy = -12.5
    path = str(tmp_path / "t.xyz")
    shprobe.write_trajectory(path, [ (["C", "O", "H"], cfg) ])
    frames = shprobe.read_trajectory(path)
    assert len(frames) == 1
    symbols, back = frames[0]
    assert symbols == ["C", "O", "H"]
    assert back.energy == pytest.approx(-12.5)
    assert np.asarray(back.positions).shape == (3, 3)
