"""Cost and mixer layers of one digitized adiabatic step.

Gate conventions follow the per-step circuit: every qubit receives an X rotation
RX(mixer_scale * beta), then every edge (i, j) receives RZZ(-2 * gamma), where
RX(phi) = exp(-i phi X / 2) and RZZ(phi) = exp(-i phi Z_i Z_j / 2).
"""
import logging
from dataclasses import dataclass
from functools import reduce

import numpy as np

from src.utils.config import STEP_UNITARITY_TOL
from .graph import GraphInstance

logger = logging.getLogger(__name__)


def spins(g: GraphInstance) -> np.ndarray:
    """sigma[b, i] = +1 if bit i of basis index b is 0, else -1."""
    masks = np.arange(g.dimension, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(g.n)) & 1
    return 1 - 2 * bits


def cost_diagonal(g: GraphInstance) -> np.ndarray:
    """Diagonal of sum over edges of (1 - Z_i Z_j) / 2: the cut value of each basis state."""
    sigma = spins(g)
    values = np.zeros(g.dimension, dtype=float)
    for i, j in g.edges:
        values += 0.5 * (1 - sigma[:, i] * sigma[:, j])
    return values


def zz_field(g: GraphInstance) -> np.ndarray:
    """Diagonal of sum over edges of Z_i Z_j."""
    sigma = spins(g)
    field = np.zeros(g.dimension, dtype=float)
    for i, j in g.edges:
        field += sigma[:, i] * sigma[:, j]
    return field


def rx(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def mixer_layer(n: int, angle: float) -> np.ndarray:
    """RX(angle) on every one of n qubits, as a dense 2^n x 2^n matrix."""
    if not np.isfinite(angle):
        raise ValueError(f"Mixer angle must be finite, got {angle}")
    return reduce(np.kron, [rx(angle)] * n)


def cost_phases(g: GraphInstance, gamma: float) -> np.ndarray:
    """Diagonal of the product of RZZ(-2 gamma) over all edges: exp(+i gamma sum Z_i Z_j)."""
    if not np.isfinite(gamma):
        raise ValueError(f"Cost angle must be finite, got {gamma}")
    return np.exp(1j * gamma * zz_field(g))


def cost_phase_layer(g: GraphInstance, gamma: float) -> np.ndarray:
    return np.diag(cost_phases(g, gamma))


def apply_mixer(n: int, angle: float, array: np.ndarray) -> np.ndarray:
    """Apply RX(angle) to every qubit of a state vector or of each column of a matrix."""
    gate = rx(angle)
    columns = array.shape[1:] if array.ndim > 1 else ()
    tensor = array.reshape((2,) * n + columns)
    for axis in range(n):
        tensor = np.moveaxis(np.tensordot(gate, tensor, axes=([1], [axis])), 0, axis)
    return tensor.reshape(array.shape)


@dataclass(frozen=True)
class StepOperator:
    """One digitized step in factored form: diag(phases) @ mixer_layer(n, mixer_angle)."""

    n: int
    mixer_angle: float
    phases: np.ndarray

    def apply(self, array: np.ndarray) -> np.ndarray:
        mixed = apply_mixer(self.n, self.mixer_angle, array)
        if mixed.ndim == 1:
            return self.phases * mixed
        return self.phases[:, None] * mixed

    def matrix(self) -> np.ndarray:
        return self.phases[:, None] * mixer_layer(self.n, self.mixer_angle)

    def residual(self) -> float:
        """Unitarity residual of the factored step: RX gate plus unit-modulus phases."""
        gate = rx(self.mixer_angle)
        gate_residual = np.max(np.abs(gate.conj().T @ gate - np.eye(2)))
        phase_residual = np.max(np.abs(np.abs(self.phases) - 1.0))
        return float(max(gate_residual, phase_residual))


def step_operator(g: GraphInstance, beta: float, gamma: float, mixer_scale: float) -> StepOperator:
    if not all(np.isfinite(x) for x in (beta, gamma, mixer_scale)):
        raise ValueError(f"Step parameters must be finite: beta={beta}, gamma={gamma}, "
                         f"mixer_scale={mixer_scale}")
    op = StepOperator(n=g.n, mixer_angle=mixer_scale * beta, phases=cost_phases(g, gamma))
    residual = op.residual()
    if residual > STEP_UNITARITY_TOL:
        raise ValueError(f"Step operator not unitary: residual {residual:.3e} > {STEP_UNITARITY_TOL:.0e}")
    return op


def step_unitary(g: GraphInstance, beta: float, gamma: float, mixer_scale: float) -> np.ndarray:
    """Dense step: cost phases applied after the mixer rotations."""
    return step_operator(g, beta, gamma, mixer_scale).matrix()


def unitarity_residual(U: np.ndarray) -> float:
    """max |(U^dagger U - I)_ij|"""
    gram = U.conj().T @ U
    gram[np.diag_indices_from(gram)] -= 1.0
    return float(np.max(np.abs(gram)))
