"""Band tracking across spectral snapshots and the end-to-end band permutation."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.utils.config import (
    CONFIDENCE_FLOOR,
    CONTINUITY_FACTOR,
    DEFAULT_WORKERS,
    MANIFOLD_WEIGHT,
    MAX_QUBITS,
)
from .evolve import DigitizedEvolution, Schedule, decompose_batches
from .graph import GraphInstance
from .spectral import TWO_PI, SpectralSnapshot, circular_distance

logger = logging.getLogger(__name__)

ASSIGNMENT_MODES = ("optimal", "greedy")


class TrackingError(ValueError):
    pass


@dataclass
class BandTrack:
    band_count: int
    trajectories: np.ndarray
    assignments: List[np.ndarray]
    confidences: List[float]
    s_values: List[float]
    initial_phases: np.ndarray
    final_phases: np.ndarray
    final_vectors: Optional[np.ndarray] = None
    continuity_violations: int = 0
    greedy_disagreements: int = 0


@dataclass
class PermutationResult:
    pi: np.ndarray
    cycles: List[List[int]]
    nontrivial_cycle_count: int
    min_confidence: float = 1.0
    parity: int = 0
    manifold: Dict[str, object] = field(default_factory=dict)


def overlap_matrix(a: SpectralSnapshot, b: SpectralSnapshot) -> np.ndarray:
    """|<v_i^a, v_j^b>| for every pair of columns."""
    if a.vectors is None or b.vectors is None:
        raise TrackingError("Snapshots without eigenvectors cannot be overlapped")
    if a.vectors.shape != b.vectors.shape:
        raise TrackingError(f"Snapshot dimensions differ: {a.vectors.shape} vs {b.vectors.shape}")
    return np.clip(np.abs(a.vectors.conj().T @ b.vectors), 0.0, 1.0)


def assign_bands(overlaps: np.ndarray) -> np.ndarray:
    """Bijection perm (row i -> column perm[i]) maximizing the total overlap."""
    overlaps = np.asarray(overlaps, dtype=float)
    if overlaps.ndim != 2 or overlaps.shape[0] != overlaps.shape[1]:
        raise TrackingError(f"Overlap matrix must be square, got shape {overlaps.shape}")
    rows, cols = linear_sum_assignment(overlaps, maximize=True)
    perm = np.empty(overlaps.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def greedy_assignment(overlaps: np.ndarray) -> np.ndarray:
    """Row by row, take the largest overlap among unused columns."""
    overlaps = np.asarray(overlaps, dtype=float)
    size = overlaps.shape[0]
    perm = np.empty(size, dtype=np.int64)
    used = np.zeros(size, dtype=bool)
    for i in range(size):
        candidates = np.where(used, -np.inf, overlaps[i])
        j = int(np.argmax(candidates))
        perm[i] = j
        used[j] = True
    return perm


def assignment_total(overlaps: np.ndarray, perm: np.ndarray) -> float:
    return float(np.sum(overlaps[np.arange(perm.size), perm]))


def continuity_threshold(band_count: int) -> float:
    return CONTINUITY_FACTOR * TWO_PI / band_count


class BandTracker:
    """Sequential fold of per-step assignments over snapshots in ascending s."""

    def __init__(self, mode: str = "optimal"):
        if mode not in ASSIGNMENT_MODES:
            raise TrackingError(f"Unknown assignment mode {mode!r}")
        self.mode = mode
        self.first: Optional[SpectralSnapshot] = None
        self.previous: Optional[SpectralSnapshot] = None
        self.columns: Optional[np.ndarray] = None
        self.trajectory_columns: List[np.ndarray] = []
        self.assignments: List[np.ndarray] = []
        self.confidences: List[float] = []
        self.s_values: List[float] = []
        self.continuity_violations = 0
        self.greedy_disagreements = 0

    def _start(self, snap: SpectralSnapshot) -> None:
        self.first = snap.without_vectors()
        self.columns = np.arange(snap.size)
        self.trajectory_columns = [snap.phases.copy()]
        self.s_values = [snap.s]

    def push(self, snap: SpectralSnapshot, overlaps: Optional[np.ndarray] = None) -> None:
        if snap.vectors is None:
            raise TrackingError(f"Snapshot at s={snap.s} has no eigenvectors")
        if self.previous is None:
            self._start(snap)
        else:
            if snap.size != self.previous.size:
                raise TrackingError(f"Snapshot at s={snap.s} has {snap.size} bands, "
                                    f"expected {self.previous.size}")
            if overlaps is None:
                overlaps = overlap_matrix(self.previous, snap)
            self._advance(overlaps, snap)
        self.previous = snap

    def _advance(self, overlaps: np.ndarray, snap: SpectralSnapshot) -> None:
        optimal = assign_bands(overlaps)
        greedy = greedy_assignment(overlaps)
        disagreements = int(np.count_nonzero(optimal != greedy))
        if disagreements:
            self.greedy_disagreements += disagreements
            logger.debug("Greedy and optimal assignment differ on %d bands at s=%.6f "
                         "(totals %.6f vs %.6f)", disagreements, snap.s,
                         assignment_total(overlaps, greedy), assignment_total(overlaps, optimal))
        perm = optimal if self.mode == "optimal" else greedy
        confidence = float(np.min(overlaps[np.arange(perm.size), perm]))
        if confidence < CONFIDENCE_FLOOR:
            logger.warning("Low tracking confidence %.3f between s=%.6f and s=%.6f",
                           confidence, self.previous.s, snap.s)

        self.columns = perm[self.columns]
        tracked = snap.phases[self.columns]
        jumps = circular_distance(tracked, self.trajectory_columns[-1])
        limit = continuity_threshold(snap.size)
        violations = int(np.count_nonzero(jumps > limit))
        if violations:
            self.continuity_violations += violations
            logger.warning("%d tracked bands jump more than %.4f rad at s=%.6f",
                           violations, limit, snap.s)

        self.assignments.append(perm)
        self.confidences.append(confidence)
        self.trajectory_columns.append(tracked)
        self.s_values.append(snap.s)

    def finish(self) -> BandTrack:
        """Result of the fold; a lone snapshot is tracked against itself."""
        if self.previous is not None and len(self.s_values) == 1:
            logger.info("Single snapshot: tracking against itself")
            self.push(self.previous)
        return self.result()

    def result(self) -> BandTrack:
        if self.first is None or len(self.s_values) < 2:
            raise TrackingError("Band tracking needs at least two snapshots")
        return BandTrack(
            band_count=self.first.size,
            trajectories=np.column_stack(self.trajectory_columns),
            assignments=list(self.assignments),
            confidences=list(self.confidences),
            s_values=list(self.s_values),
            initial_phases=self.first.phases.copy(),
            final_phases=self.previous.phases.copy(),
            final_vectors=self.previous.vectors,
            continuity_violations=self.continuity_violations,
            greedy_disagreements=self.greedy_disagreements,
        )


def track_bands(snapshots: Sequence[SpectralSnapshot], mode: str = "optimal",
                workers: int = DEFAULT_WORKERS) -> BandTrack:
    """Chain band assignments over consecutive snapshot pairs."""
    if len(snapshots) < 2:
        raise TrackingError("Band tracking needs at least two snapshots")
    sizes = {snap.size for snap in snapshots}
    if len(sizes) != 1:
        raise TrackingError(f"Snapshots have differing dimensions: {sorted(sizes)}")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        overlaps = list(executor.map(overlap_matrix, snapshots[:-1], snapshots[1:]))
    tracker = BandTracker(mode=mode)
    tracker.push(snapshots[0])
    for snap, overlap in zip(snapshots[1:], overlaps):
        tracker.push(snap, overlaps=overlap)
    return tracker.result()


def cycle_decomposition(pi: Sequence[int]) -> List[List[int]]:
    """Disjoint cycles, each starting at its smallest element, ordered by that element."""
    pi = [int(x) for x in pi]
    seen = [False] * len(pi)
    cycles = []
    for start in range(len(pi)):
        if seen[start]:
            continue
        cycle = []
        i = start
        while not seen[i]:
            seen[i] = True
            cycle.append(i)
            i = pi[i]
        cycles.append(cycle)
    return cycles


def permutation_parity(pi: Sequence[int]) -> int:
    """0 for even, 1 for odd."""
    return sum(len(c) - 1 for c in cycle_decomposition(pi)) % 2


def cycle_type(pi: Sequence[int]) -> List[int]:
    return sorted((len(c) for c in cycle_decomposition(pi)), reverse=True)


def is_permutation(pi: Sequence[int]) -> bool:
    return sorted(int(x) for x in pi) == list(range(len(pi)))


def sort_ranks(phases: np.ndarray) -> np.ndarray:
    """rank[column] = position of that column in ascending phase order."""
    ranks = np.empty(phases.size, dtype=np.int64)
    ranks[np.argsort(phases, kind="stable")] = np.arange(phases.size)
    return ranks


def compose_assignments(track: BandTrack) -> np.ndarray:
    sigma = np.arange(track.band_count)
    for perm in track.assignments:
        sigma = perm[sigma]
    return sigma


def manifold_columns(final_vectors: np.ndarray, optimal_indices: np.ndarray,
                     weight: float = MANIFOLD_WEIGHT) -> np.ndarray:
    """Final columns with at least `weight` squared projection onto the optimal basis states."""
    projection = np.sum(np.abs(final_vectors[optimal_indices, :]) ** 2, axis=0)
    return np.flatnonzero(projection >= weight)


def manifold_diagnostics(track: BandTrack, pi: np.ndarray,
                         optimal_indices: np.ndarray) -> Dict[str, object]:
    if track.final_vectors is None:
        return {}
    final_ranks = sort_ranks(track.final_phases)
    columns = manifold_columns(track.final_vectors, optimal_indices)
    final_slots = sorted(int(final_ranks[c]) for c in columns)
    inverse = np.argsort(pi)
    pairs = sorted([int(inverse[slot]), slot] for slot in final_slots)
    return {
        "final_slots": final_slots,
        "initial_slots": [p[0] for p in pairs],
        "slot_pairs": pairs,
        "band_count": len(final_slots),
    }


def end_to_end_permutation(track: BandTrack,
                           optimal_indices: Optional[np.ndarray] = None) -> PermutationResult:
    """pi[initial sorted slot] = final sorted slot, with its cycle structure."""
    sigma = compose_assignments(track)
    if not is_permutation(sigma):
        raise TrackingError("Composed band assignment is not a bijection")
    rank_initial = sort_ranks(track.initial_phases)
    rank_final = sort_ranks(track.final_phases)
    pi = np.empty(track.band_count, dtype=np.int64)
    pi[rank_initial] = rank_final[sigma]
    cycles = cycle_decomposition(pi)
    manifold = {}
    if optimal_indices is not None:
        manifold = manifold_diagnostics(track, pi, optimal_indices)
    return PermutationResult(
        pi=pi,
        cycles=cycles,
        nontrivial_cycle_count=sum(1 for c in cycles if len(c) >= 2),
        min_confidence=min(track.confidences) if track.confidences else 1.0,
        parity=permutation_parity(pi),
        manifold=manifold,
    )


@dataclass
class RefinementCheck:
    agree: bool
    coarse_pi: np.ndarray
    fine_pi: np.ndarray
    coarse_min_confidence: float
    fine_min_confidence: float
    low_confidence_steps: List[Tuple[str, float, float]] = field(default_factory=list)


def low_confidence_steps(track: BandTrack,
                         floor: float = CONFIDENCE_FLOOR) -> List[Tuple[float, float]]:
    """(s, confidence) of every assignment step whose minimum overlap is below floor."""
    return [(float(s), float(c)) for s, c in zip(track.s_values[1:], track.confidences) if c < floor]


def refined_schedule(sched: Schedule) -> Schedule:
    """Same run with the snapshot stride halved."""
    return replace(sched, snapshot_stride=max(1, sched.snapshot_stride // 2))


def track_schedule(g: GraphInstance, sched: Schedule, mode: str = "optimal",
                   workers: int = DEFAULT_WORKERS, max_qubits: int = MAX_QUBITS) -> BandTrack:
    """Stream one evolution through a BandTracker without keeping old eigenvectors."""
    evolution = DigitizedEvolution(g, sched, max_qubits=max_qubits)
    tracker = BandTracker(mode=mode)
    for snap in decompose_batches(evolution.unitaries(), workers=workers):
        tracker.push(snap)
    return tracker.finish()


def compare_tracks(coarse: BandTrack, fine: BandTrack) -> RefinementCheck:
    """End-to-end permutations of two snapshot densities of the same run.

    A disagreement is logged with the low-confidence steps of both tracks.
    """
    if coarse.band_count != fine.band_count:
        raise TrackingError(f"Band counts differ: {coarse.band_count} vs {fine.band_count}")
    coarse_result = end_to_end_permutation(coarse)
    fine_result = end_to_end_permutation(fine)
    weak = ([("coarse", s, c) for s, c in low_confidence_steps(coarse)]
            + [("fine", s, c) for s, c in low_confidence_steps(fine)])
    check = RefinementCheck(
        agree=bool(np.array_equal(coarse_result.pi, fine_result.pi)),
        coarse_pi=coarse_result.pi,
        fine_pi=fine_result.pi,
        coarse_min_confidence=coarse_result.min_confidence,
        fine_min_confidence=fine_result.min_confidence,
        low_confidence_steps=weak,
    )
    if not check.agree:
        logger.warning(
            "End-to-end permutation changes under refinement (%d vs %d snapshots); "
            "min confidence %.3f coarse, %.3f fine; low-confidence steps: %s",
            len(coarse.s_values), len(fine.s_values), check.coarse_min_confidence,
            check.fine_min_confidence,
            ", ".join(f"{run} s={s:.4f} ({c:.3f})" for run, s, c in weak) or "none",
        )
    return check


def compare_refinements(g: GraphInstance, sched_coarse: Schedule,
                        sched_fine: Optional[Schedule] = None, mode: str = "optimal",
                        workers: int = DEFAULT_WORKERS,
                        max_qubits: int = MAX_QUBITS) -> RefinementCheck:
    """Track the same schedule at two snapshot strides and compare the permutations."""
    if sched_fine is None:
        sched_fine = refined_schedule(sched_coarse)
    coarse = track_schedule(g, sched_coarse, mode=mode, workers=workers, max_qubits=max_qubits)
    fine = track_schedule(g, sched_fine, mode=mode, workers=workers, max_qubits=max_qubits)
    return compare_tracks(coarse, fine)
