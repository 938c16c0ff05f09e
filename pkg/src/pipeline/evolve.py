"""Digitized adiabatic evolution: linear schedule, cumulative unitary, final-state statistics."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy.linalg import polar

from src.utils.config import (
    DEFAULT_MIXER_SCALE,
    DEFAULT_WORKERS,
    MAX_QUBITS,
    SNAPSHOTS_PER_RUN,
    UNITARITY_TOL,
)
from .graph import CutOracleResult, GraphInstance, check_size, index_to_bitstring
from .hamiltonian import step_operator, unitarity_residual
from .spectral import SpectralSnapshot, eigendecompose_unitary

logger = logging.getLogger(__name__)


class EvolutionError(RuntimeError):
    pass


def default_stride(K: int) -> int:
    return max(1, K // SNAPSHOTS_PER_RUN)


@dataclass(frozen=True)
class Schedule:
    K: int
    T: float
    mixer_scale: float = DEFAULT_MIXER_SCALE
    snapshot_stride: Optional[int] = None

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"Step count K must be a positive integer, got {self.K}")
        if not np.isfinite(self.T) or self.T <= 0:
            raise ValueError(f"Total time T must be positive, got {self.T}")
        if not np.isfinite(self.mixer_scale):
            raise ValueError(f"Mixer scale must be finite, got {self.mixer_scale}")
        stride = default_stride(self.K) if self.snapshot_stride is None else self.snapshot_stride
        if int(stride) != stride or stride < 1:
            raise ValueError(f"Snapshot stride must be a positive integer, got {stride}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "snapshot_stride", int(stride))

    @property
    def dt(self) -> float:
        return self.T / self.K

    def snapshot_steps(self) -> List[int]:
        """Every stride-th step, always including steps 1 and K."""
        steps = set(range(self.snapshot_stride, self.K + 1, self.snapshot_stride))
        steps.update({1, self.K})
        return sorted(steps)


def schedule_params(sched: Schedule, step: int) -> Tuple[float, float, float]:
    """(s, beta, gamma) at step 1 <= step <= K of the linear schedule."""
    if not 1 <= step <= sched.K:
        raise ValueError(f"Step index {step} outside 1..{sched.K}")
    s = step / sched.K
    return s, (1.0 - s) * sched.dt, s * sched.dt


def initial_state(n: int) -> np.ndarray:
    """Uniform superposition over all 2^n basis states."""
    if n < 1:
        raise ValueError(f"Qubit count must be positive, got {n}")
    dim = 2 ** n
    return np.full(dim, 1.0 / np.sqrt(dim), dtype=complex)


@dataclass
class EvolutionResult:
    snapshots: List[SpectralSnapshot]
    final_state: np.ndarray
    outcome_distribution: np.ndarray
    reunitarizations: int = 0
    max_unitarity_residual: float = 0.0


@dataclass
class DigitizedEvolution:
    """Accumulates U_l = S_l U_{l-1} and yields the cumulative unitary at snapshot steps."""

    graph: GraphInstance
    schedule: Schedule
    max_qubits: int = MAX_QUBITS
    reunitarize_tol: float = UNITARITY_TOL
    cumulative: Optional[np.ndarray] = field(default=None, init=False)
    reunitarizations: int = field(default=0, init=False)
    max_residual: float = field(default=0.0, init=False)

    def __post_init__(self):
        check_size(self.graph.n, self.max_qubits)
        dim = self.graph.dimension
        try:
            self.cumulative = np.eye(dim, dtype=complex)
        except (MemoryError, ValueError) as e:
            raise EvolutionError(f"Cannot allocate {dim}x{dim} cumulative unitary: {e}")

    def _control_drift(self, step: int) -> None:
        residual = unitarity_residual(self.cumulative)
        if residual > self.reunitarize_tol:
            self.cumulative, _ = polar(self.cumulative)
            self.reunitarizations += 1
            logger.warning("Re-unitarized cumulative unitary at step %d (residual %.3e)", step, residual)
            residual = unitarity_residual(self.cumulative)
        self.max_residual = max(self.max_residual, residual)

    def unitaries(self) -> Iterator[Tuple[int, float, np.ndarray]]:
        """Yield (step, s, copy of U_step) at every snapshot step."""
        recorded = set(self.schedule.snapshot_steps())
        for step in range(1, self.schedule.K + 1):
            s, beta, gamma = schedule_params(self.schedule, step)
            op = step_operator(self.graph, beta, gamma, self.schedule.mixer_scale)
            self.cumulative = op.apply(self.cumulative)
            if step in recorded:
                if not np.all(np.isfinite(self.cumulative)):
                    raise EvolutionError(f"Non-finite entries in cumulative unitary at step {step}")
                self._control_drift(step)
                yield step, s, self.cumulative.copy()

    def final_state(self) -> np.ndarray:
        state = self.cumulative @ initial_state(self.graph.n)
        if not np.all(np.isfinite(state)):
            raise EvolutionError("Non-finite amplitudes in final state")
        return state


def decompose_batches(unitaries: Iterator[Tuple[int, float, np.ndarray]],
                      workers: int = DEFAULT_WORKERS) -> Iterator[SpectralSnapshot]:
    """Eigendecompose recorded unitaries in concurrent batches, yielding snapshots in order."""
    workers = max(1, workers)

    def decompose(item):
        step, s, U = item
        return eigendecompose_unitary(U, s=s, step=step)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        batch = []
        for item in unitaries:
            batch.append(item)
            if len(batch) == workers:
                yield from executor.map(decompose, batch)
                batch = []
        if batch:
            yield from executor.map(decompose, batch)


def outcome_distribution(state: np.ndarray) -> np.ndarray:
    return np.abs(state) ** 2


def run_evolution(g: GraphInstance, sched: Schedule, max_qubits: int = MAX_QUBITS,
                  workers: int = DEFAULT_WORKERS) -> EvolutionResult:
    """Full evolution keeping every snapshot (phases and eigenvectors)."""
    evolution = DigitizedEvolution(g, sched, max_qubits=max_qubits)
    logger.info("Evolving %s with K=%d, T=%g, mixer scale %g", g.describe(), sched.K, sched.T,
                sched.mixer_scale)
    snapshots = list(decompose_batches(evolution.unitaries(), workers=workers))
    state = evolution.final_state()
    return EvolutionResult(
        snapshots=snapshots,
        final_state=state,
        outcome_distribution=outcome_distribution(state),
        reunitarizations=evolution.reunitarizations,
        max_unitarity_residual=evolution.max_residual,
    )


def optimal_mass(distribution: np.ndarray, oracle: CutOracleResult) -> float:
    """Probability mass on the optimal bitstrings, clipped to [0, 1]."""
    indices = oracle.optimal_indices()
    if indices.size and indices.max() >= distribution.size:
        raise ValueError("Oracle bitstrings do not match the evolution dimension")
    return min(1.0, max(0.0, float(np.sum(distribution[indices]))))


def success_probability(res: EvolutionResult, oracle: CutOracleResult) -> float:
    return optimal_mass(res.outcome_distribution, oracle)


def sample_outcomes(distribution: np.ndarray, shots: int, seed: int) -> np.ndarray:
    """Seeded multinomial shot counts per basis index."""
    if shots < 1:
        raise ValueError(f"Shot count must be positive, got {shots}")
    probabilities = np.clip(distribution, 0.0, None)
    probabilities = probabilities / probabilities.sum()
    rng = np.random.default_rng(seed)
    return rng.multinomial(shots, probabilities)


def top_outcomes(distribution: np.ndarray, oracle: CutOracleResult, k: int = 8) -> List[dict]:
    n = int(np.log2(distribution.size))
    optimal = set(oracle.optimal_set)
    order = np.argsort(-distribution, kind="stable")[:k]
    outcomes = []
    for b in order:
        z = index_to_bitstring(int(b), n)
        outcomes.append({"bitstring": z, "probability": float(distribution[b]),
                         "is_optimal": z in optimal})
    return outcomes
