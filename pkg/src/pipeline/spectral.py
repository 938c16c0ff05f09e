"""Eigenphases of cumulative unitaries and the spectral-congestion diagnostic."""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, schur

from src.utils.config import DEGENERACY_TOL, RECONSTRUCTION_TOL, UNITARITY_TOL
from .hamiltonian import unitarity_residual

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralSnapshot:
    s: float
    phases: np.ndarray
    vectors: Optional[np.ndarray] = None
    step: int = 0
    max_residual: float = 0.0

    @property
    def size(self) -> int:
        return self.phases.size

    def without_vectors(self) -> "SpectralSnapshot":
        return replace(self, vectors=None)


@dataclass(frozen=True)
class CrowdingSeries:
    points: List[Tuple[float, float]] = field(default_factory=list)
    summary_median: float = 0.0
    summary_max: float = 0.0


def wrap_phases(theta: np.ndarray) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi
    wrapped[wrapped <= -np.pi] += TWO_PI
    return wrapped


def circular_distance(a, b):
    """Shortest angular separation, elementwise for arrays."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % TWO_PI
    return np.minimum(d, TWO_PI - d)


def degenerate_clusters(phases: np.ndarray, tol: float = DEGENERACY_TOL) -> List[List[int]]:
    """Groups of sorted-phase indices closer than tol, including across the branch cut."""
    if phases.size == 0:
        return []
    clusters = [[0]]
    for j in range(1, phases.size):
        if phases[j] - phases[j - 1] < tol:
            clusters[-1].append(j)
        else:
            clusters.append([j])
    if len(clusters) > 1 and phases[0] + TWO_PI - phases[-1] < tol:
        clusters[0] = clusters.pop() + clusters[0]
    return clusters


def reconstruction_residuals(U: np.ndarray, phases: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """||U v_j - exp(i theta_j) v_j||_2 per column."""
    return np.linalg.norm(U @ vectors - vectors * np.exp(1j * phases)[None, :], axis=0)


def eigendecompose_unitary(U: np.ndarray, s: float = 1.0, step: int = 0,
                           unitarity_tol: float = UNITARITY_TOL,
                           cluster_tol: float = DEGENERACY_TOL) -> SpectralSnapshot:
    """Eigenphases in (-pi, pi], sorted ascending, with orthonormal eigenvectors.

    U is normal, so its complex Schur form is diagonal up to roundoff and the
    Schur vectors are eigenvectors.
    """
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise SpectralError(f"Expected a square matrix, got shape {U.shape}")
    residual = unitarity_residual(U)
    if residual > unitarity_tol:
        raise SpectralError(f"Matrix is not unitary: residual {residual:.3e} > {unitarity_tol:.0e}")
    try:
        T, Z = schur(U, output="complex")
    except (LinAlgError, ValueError) as e:
        raise SpectralError(f"Schur decomposition failed at step {step}: {e}")

    phases = wrap_phases(np.angle(np.diag(T)))
    order = np.argsort(phases, kind="stable")
    phases = phases[order]
    vectors = Z[:, order]

    for cluster in degenerate_clusters(phases, cluster_tol):
        if len(cluster) > 1:
            q, _ = np.linalg.qr(vectors[:, cluster])
            vectors[:, cluster] = q

    max_residual = float(np.max(reconstruction_residuals(U, phases, vectors)))
    if max_residual > RECONSTRUCTION_TOL:
        logger.warning("Eigen-reconstruction residual %.3e at step %d exceeds %.0e",
                       max_residual, step, RECONSTRUCTION_TOL)
    return SpectralSnapshot(s=float(s), phases=phases, vectors=vectors, step=step,
                            max_residual=max_residual)


def circular_gaps(phases: Sequence[float]) -> np.ndarray:
    """Adjacent gaps of sorted phases followed by the wrap-around gap; they sum to 2 pi."""
    theta = np.asarray(phases, dtype=float)
    if theta.size < 2:
        raise ValueError("At least two phases are needed for a gap")
    return np.append(np.diff(theta), theta[0] + TWO_PI - theta[-1])


def delta_theta_min(snap: SpectralSnapshot) -> float:
    """Minimum circular spacing between adjacent eigenphases."""
    return float(max(0.0, np.min(circular_gaps(snap.phases))))


def crowding_series(snapshots: Sequence[SpectralSnapshot]) -> CrowdingSeries:
    if not snapshots:
        raise ValueError("Crowding series needs at least one snapshot")
    points = [(snap.s, delta_theta_min(snap)) for snap in snapshots]
    values = np.array([gap for _, gap in points])
    return CrowdingSeries(points=points, summary_median=float(np.median(values)),
                          summary_max=float(np.max(values)))
