import numpy as np
import pytest

from src.pipeline.hamiltonian import mixer_layer
from src.pipeline.spectral import (
    TWO_PI,
    SpectralError,
    SpectralSnapshot,
    circular_gaps,
    crowding_series,
    degenerate_clusters,
    delta_theta_min,
    eigendecompose_unitary,
    reconstruction_residuals,
    wrap_phases,
)


def snapshot(phases, s=0.5):
    return SpectralSnapshot(s=s, phases=np.sort(np.asarray(phases, dtype=float)))


def test_identity_decomposition():
    snap = eigendecompose_unitary(np.eye(4))
    np.testing.assert_allclose(snap.phases, 0.0, atol=1e-15)
    np.testing.assert_allclose(np.abs(snap.vectors), np.eye(4), atol=1e-12)


def test_branch_cut_keeps_plus_pi():
    snap = eigendecompose_unitary(np.diag([1.0, -1.0]))
    np.testing.assert_allclose(snap.phases, [0.0, np.pi], atol=1e-15)


def test_rx_pi_phases():
    snap = eigendecompose_unitary(mixer_layer(1, np.pi))
    np.testing.assert_allclose(snap.phases, [-np.pi / 2, np.pi / 2], atol=1e-12)


def test_random_unitary_reconstruction_and_orthonormality(random_unitary):
    U = random_unitary(32)
    snap = eigendecompose_unitary(U, s=0.3, step=5)
    assert np.all(np.diff(snap.phases) >= 0)
    assert np.all(snap.phases > -np.pi) and np.all(snap.phases <= np.pi)
    assert np.max(reconstruction_residuals(U, snap.phases, snap.vectors)) <= 1e-8
    gram = snap.vectors.conj().T @ snap.vectors
    np.testing.assert_allclose(gram, np.eye(32), atol=1e-8)
    assert snap.max_residual <= 1e-8
    assert (snap.s, snap.step) == (0.3, 5)


def test_degenerate_unitary_vectors_orthonormal():
    Q, _ = np.linalg.qr(np.random.default_rng(3).normal(size=(6, 6)))
    U = Q @ np.diag(np.exp(1j * np.array([0.4, 0.4, 0.4, -1.0, -1.0, 2.0]))) @ Q.T
    snap = eigendecompose_unitary(U)
    np.testing.assert_allclose(snap.vectors.conj().T @ snap.vectors, np.eye(6), atol=1e-8)
    assert delta_theta_min(snap) < 1e-10


def test_non_unitary_input_rejected():
    with pytest.raises(SpectralError, match="not unitary"):
        eigendecompose_unitary(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(SpectralError):
        eigendecompose_unitary(np.ones((2, 3)))


def test_wrap_phases_half_open_interval():
    wrapped = wrap_phases(np.array([np.pi, -np.pi, 0.5 + TWO_PI, -2.0]))
    np.testing.assert_allclose(wrapped, [np.pi, np.pi, 0.5, -2.0], atol=1e-12)


def test_clusters_merge_across_branch_cut():
    phases = np.array([-np.pi + 1e-12, 0.0, 0.3, np.pi])
    assert degenerate_clusters(phases) == [[3, 0], [1], [2]]


@pytest.mark.parametrize("phases, expected", [
    ([0.3, 0.3, 1.0], 0.0),
    ([0.0, np.pi], np.pi),
    ([-np.pi / 2, 0.0, np.pi], np.pi / 2),
])
def test_delta_theta_min_examples(phases, expected):
    assert delta_theta_min(snapshot(phases)) == pytest.approx(expected, abs=1e-15)


def test_delta_theta_min_needs_two_phases():
    with pytest.raises(ValueError):
        delta_theta_min(snapshot([0.1]))


def test_gaps_sum_to_two_pi(rng):
    for _ in range(1000):
        phases = np.sort(wrap_phases(rng.uniform(-np.pi, np.pi, size=int(rng.integers(2, 40)))))
        assert np.sum(circular_gaps(phases)) == pytest.approx(TWO_PI, abs=1e-10)


def test_rotation_invariance(rng):
    for _ in range(200):
        phases = np.sort(rng.uniform(-np.pi, np.pi, size=16))
        delta = rng.uniform(-np.pi, np.pi)
        rotated = np.sort(wrap_phases(phases + delta))
        assert abs(delta_theta_min(snapshot(phases)) - delta_theta_min(snapshot(rotated))) <= 1e-12


def test_global_phase_of_unitary(random_unitary):
    U = random_unitary(16, seed=11)
    base = eigendecompose_unitary(U)
    shifted = eigendecompose_unitary(np.exp(0.9j) * U)
    assert delta_theta_min(shifted) == pytest.approx(delta_theta_min(base), abs=1e-10)
    np.testing.assert_allclose(np.sort(wrap_phases(base.phases + 0.9)), shifted.phases, atol=1e-10)


def test_crowding_singleton():
    series = crowding_series([snapshot([0.0, 1.0], s=1.0)])
    assert series.summary_median == series.summary_max == pytest.approx(1.0)
    assert series.points == [(1.0, pytest.approx(1.0))]


def test_crowding_constant_and_even_median():
    constant = crowding_series([snapshot([0.0, 2.0], s=s) for s in (0.25, 0.5, 0.75)])
    assert constant.summary_median == constant.summary_max
    even = crowding_series([snapshot([0.0, g], s=s) for s, g in ((0.25, 0.1), (0.5, 0.3),
                                                                     (0.75, 0.7), (1.0, 0.2))])
    assert even.summary_median == pytest.approx(0.25)
    assert even.summary_max == pytest.approx(0.7)


def test_crowding_respects_pigeonhole_bound(random_unitary):
    snaps = [eigendecompose_unitary(random_unitary(8, seed=k), s=k / 4) for k in range(1, 5)]
    series = crowding_series(snaps)
    assert all(0 <= gap <= TWO_PI / 8 for _, gap in series.points)


def test_crowding_empty():
    with pytest.raises(ValueError):
        crowding_series([])
