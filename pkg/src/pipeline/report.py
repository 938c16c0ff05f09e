"""Experiment orchestration: oracle -> evolution -> spectra -> tracking -> outputs."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.config import (
    DEFAULT_K,
    DEFAULT_MIXER_SCALE,
    DEFAULT_T,
    DEFAULT_WORKERS,
    MAX_QUBITS,
)
from src.utils.preprocess import to_builtin
from .evolve import (
    DigitizedEvolution,
    EvolutionError,
    Schedule,
    decompose_batches,
    optimal_mass,
    outcome_distribution,
    sample_outcomes,
)
from .graph import (
    CutOracleResult,
    GraphFormatError,
    GraphInstance,
    brute_force_optimum,
    cut_table,
    index_to_bitstring,
    parse_edge_list,
    read_edge_list,
)
from .graph_generator import preset_instance
from .spectral import CrowdingSeries, SpectralError, SpectralSnapshot, crowding_series
from .tracking import (
    BandTrack,
    BandTracker,
    PermutationResult,
    RefinementCheck,
    TrackingError,
    compare_tracks,
    end_to_end_permutation,
    refined_schedule,
    track_schedule,
)

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class PipelineStageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


_ERROR_STAGES = (
    (GraphFormatError, "graph"),
    (EvolutionError, "evolve"),
    (SpectralError, "spectral"),
    (TrackingError, "tracking"),
)


@contextmanager
def stage(name: str):
    """Tag any error raised inside the block with its pipeline stage."""
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as e:
        tagged = next((tag for kind, tag in _ERROR_STAGES if isinstance(e, kind)), name)
        raise PipelineStageError(tagged, f"{type(e).__name__}: {e}") from e


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    graph_path: Optional[Path] = None
    graph_text: Optional[str] = None
    preset: Optional[str] = None
    preset_seed: int = 0
    k: int = Field(DEFAULT_K, ge=1)
    t: float = Field(DEFAULT_T, gt=0)
    mixer_scale: float = DEFAULT_MIXER_SCALE
    stride: Optional[int] = Field(None, ge=1)
    out: Path = Path("runs") / "latest"
    shots: Optional[int] = Field(None, ge=1)
    seed: int = 0
    sweep: Optional[List[int]] = None
    workers: int = Field(DEFAULT_WORKERS, ge=1)
    assignment: str = "optimal"
    max_qubits: int = Field(MAX_QUBITS, ge=1)
    check_refinement: bool = False

    @field_validator("sweep", mode="before")
    @classmethod
    def split_sweep(cls, value):
        if isinstance(value, str):
            return [int(part) for part in value.split(",") if part.strip()]
        return value

    @field_validator("sweep")
    @classmethod
    def positive_sweep(cls, value):
        if value is not None and (not value or any(k < 1 for k in value)):
            raise ValueError("sweep must list positive step counts")
        return value

    @field_validator("assignment")
    @classmethod
    def known_assignment(cls, value):
        if value not in ("optimal", "greedy"):
            raise ValueError(f"assignment must be 'optimal' or 'greedy', got {value!r}")
        return value

    @model_validator(mode="after")
    def one_graph_source(self):
        sources = [self.graph_path, self.graph_text, self.preset]
        if sum(source is not None for source in sources) != 1:
            raise ValueError("exactly one of graph_path, graph_text or preset is required")
        return self

    def schedule(self) -> Schedule:
        return Schedule(K=self.k, T=self.t, mixer_scale=self.mixer_scale,
                        snapshot_stride=self.stride)


class RunSummary(BaseModel):
    n: int
    num_edges: int
    k: int
    t: float
    mixer_scale: float
    c_star: int
    degeneracy: int
    p_succ: float = Field(ge=0.0, le=1.0)
    median_dtheta_min: float
    max_dtheta_min: float
    nontrivial_cycle_count: int
    snapshot_count: int
    min_tracking_confidence: float

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "n": 5, "num_edges": 6, "k": 160, "t": 50.0, "mixer_scale": 5.0,
                "c_star": 5, "degeneracy": 2, "p_succ": 0.9991,
                "median_dtheta_min": 0.01382, "max_dtheta_min": 0.07356,
                "nontrivial_cycle_count": 2, "snapshot_count": 160,
                "min_tracking_confidence": 0.71,
            }
        }
    )

    @model_validator(mode="after")
    def median_below_max(self):
        if self.median_dtheta_min > self.max_dtheta_min:
            raise ValueError("median Δθ_min exceeds its maximum")
        return self


@dataclass
class RunArtifacts:
    config: RunConfig
    graph: GraphInstance
    oracle: CutOracleResult
    schedule: Schedule
    snapshots: List[SpectralSnapshot]
    distribution: np.ndarray
    crowding: CrowdingSeries
    track: BandTrack
    permutation: PermutationResult
    summary: RunSummary
    samples: Optional[np.ndarray] = None
    refinement: Optional[RefinementCheck] = None
    reunitarizations: int = 0
    max_unitarity_residual: float = 0.0


def load_graph(cfg: RunConfig) -> GraphInstance:
    if cfg.graph_path is not None:
        return read_edge_list(cfg.graph_path)
    if cfg.graph_text is not None:
        return parse_edge_list(cfg.graph_text.replace("\\n", "\n"))
    return preset_instance(cfg.preset, seed=cfg.preset_seed)


def optimum_for(cfg: RunConfig) -> tuple:
    with stage("graph"):
        g = load_graph(cfg)
    with stage("oracle"):
        oracle = brute_force_optimum(g, max_qubits=cfg.max_qubits)
    return g, oracle


def _evolve_and_track(g: GraphInstance, sched: Schedule, cfg: RunConfig):
    with stage("evolve"):
        evolution = DigitizedEvolution(g, sched, max_qubits=cfg.max_qubits)
    tracker = BandTracker(mode=cfg.assignment)
    snapshots = []
    snapshot_stream = decompose_batches(evolution.unitaries(), workers=cfg.workers)
    while True:
        with stage("spectral"):
            snap = next(snapshot_stream, None)
        if snap is None:
            break
        with stage("tracking"):
            tracker.push(snap)
        snapshots.append(snap.without_vectors())
    with stage("tracking"):
        track = tracker.finish()
    with stage("evolve"):
        state = evolution.final_state()
    return evolution, snapshots, track, state


def run_experiment(cfg: RunConfig, write: bool = True) -> RunSummary:
    return execute(cfg, write=write).summary


def execute(cfg: RunConfig, write: bool = True) -> RunArtifacts:
    """Run the full pipeline for one configuration and optionally write its outputs."""
    g, oracle = optimum_for(cfg)
    with stage("config"):
        sched = cfg.schedule()
    logger.info("Running %s, C*=%d, degeneracy=%d, K=%d, T=%g", g.describe(), oracle.c_star,
                oracle.degeneracy, sched.K, sched.T)

    evolution, snapshots, track, state = _evolve_and_track(g, sched, cfg)
    distribution = outcome_distribution(state)
    p_succ = optimal_mass(distribution, oracle)

    with stage("spectral"):
        crowding = crowding_series(snapshots)
    with stage("tracking"):
        permutation = end_to_end_permutation(track, optimal_indices=oracle.optimal_indices())

    refinement = None
    if cfg.check_refinement:
        with stage("tracking"):
            fine = track_schedule(g, refined_schedule(sched), mode=cfg.assignment,
                                  workers=cfg.workers, max_qubits=cfg.max_qubits)
            refinement = compare_tracks(track, fine)

    samples = None
    if cfg.shots is not None:
        samples = sample_outcomes(distribution, cfg.shots, cfg.seed)

    summary = RunSummary(
        n=g.n,
        num_edges=g.num_edges,
        k=sched.K,
        t=sched.T,
        mixer_scale=sched.mixer_scale,
        c_star=oracle.c_star,
        degeneracy=oracle.degeneracy,
        p_succ=p_succ,
        median_dtheta_min=crowding.summary_median,
        max_dtheta_min=crowding.summary_max,
        nontrivial_cycle_count=permutation.nontrivial_cycle_count,
        snapshot_count=len(snapshots),
        min_tracking_confidence=permutation.min_confidence,
    )
    artifacts = RunArtifacts(
        config=cfg, graph=g, oracle=oracle, schedule=sched, snapshots=snapshots,
        distribution=distribution, crowding=crowding, track=track, permutation=permutation,
        summary=summary, samples=samples, refinement=refinement,
        reunitarizations=evolution.reunitarizations,
        max_unitarity_residual=evolution.max_residual,
    )
    if write:
        with stage("output"):
            emit_outputs(artifacts, cfg.out)
    logger.info("Finished K=%d: P_succ=%.4f, median Δθ_min=%.4g, nontrivial cycles=%d",
                sched.K, summary.p_succ, summary.median_dtheta_min,
                summary.nontrivial_cycle_count)
    return artifacts


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def phases_frame(track: BandTrack) -> pd.DataFrame:
    bands, count = track.trajectories.shape
    return pd.DataFrame({
        "s": np.repeat(np.asarray(track.s_values, dtype=float), bands),
        "band_index": np.tile(np.arange(bands), count),
        "theta": track.trajectories.T.reshape(-1),
    })


def crowding_frame(crowding: CrowdingSeries) -> pd.DataFrame:
    return pd.DataFrame(crowding.points, columns=["s", "dtheta_min"])


def histogram_frame(g: GraphInstance, oracle: CutOracleResult,
                    distribution: np.ndarray) -> pd.DataFrame:
    bitstrings = [index_to_bitstring(b, g.n) for b in range(distribution.size)]
    optimal = set(oracle.optimal_set)
    return pd.DataFrame({
        "bitstring": bitstrings,
        "probability": distribution,
        "cut_value": cut_table(g),
        "is_optimal": [z in optimal for z in bitstrings],
    })


def permutation_payload(artifacts: RunArtifacts) -> Dict[str, object]:
    permutation, track = artifacts.permutation, artifacts.track
    payload = {
        "band_count": track.band_count,
        "assignment_mode": artifacts.config.assignment,
        "step_confidences": [[s, c] for s, c in zip(track.s_values[1:], track.confidences)],
        "min_confidence": permutation.min_confidence,
        "pi": permutation.pi,
        "cycles": permutation.cycles,
        "nontrivial_cycle_count": permutation.nontrivial_cycle_count,
        "parity": permutation.parity,
        "manifold": permutation.manifold,
        "continuity_violations": track.continuity_violations,
        "greedy_disagreements": track.greedy_disagreements,
        "reunitarizations": artifacts.reunitarizations,
        "max_unitarity_residual": artifacts.max_unitarity_residual,
    }
    refinement = artifacts.refinement
    if refinement is not None:
        payload["refinement"] = {
            "agree": refinement.agree,
            "fine_pi": refinement.fine_pi,
            "coarse_min_confidence": refinement.coarse_min_confidence,
            "fine_min_confidence": refinement.fine_min_confidence,
            "low_confidence_steps": [list(step) for step in refinement.low_confidence_steps],
        }
    return to_builtin(payload)


def _write_json(payload: Dict[str, object], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def emit_outputs(artifacts: RunArtifacts, out_dir: Path) -> Dict[str, Path]:
    """Write phases, crowding, histogram, permutation and summary files to out_dir."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "phases": out_dir / "phases.csv",
            "crowding": out_dir / "crowding.csv",
            "histogram": out_dir / "histogram.csv",
            "permutation": out_dir / "permutation.json",
            "summary": out_dir / "summary.json",
        }
        _write_csv(phases_frame(artifacts.track), paths["phases"])
        _write_csv(crowding_frame(artifacts.crowding), paths["crowding"])
        _write_csv(histogram_frame(artifacts.graph, artifacts.oracle, artifacts.distribution),
                   paths["histogram"])
        _write_json(permutation_payload(artifacts), paths["permutation"])
        _write_json(artifacts.summary.model_dump(), paths["summary"])
        if artifacts.samples is not None:
            paths["samples"] = out_dir / "samples.csv"
            samples = pd.DataFrame({
                "bitstring": [index_to_bitstring(b, artifacts.graph.n)
                              for b in range(artifacts.samples.size)],
                "count": artifacts.samples,
            })
            _write_csv(samples[samples["count"] > 0], paths["samples"])
    except OSError as e:
        raise OSError(f"Failed writing outputs to {out_dir}: {e}") from e
    return paths


def load_summary(path: Path) -> RunSummary:
    return RunSummary.model_validate_json(Path(path).read_text(encoding="utf-8"))


def run_sweep(cfg: RunConfig, ks: Optional[List[int]] = None) -> List[RunSummary]:
    """One experiment per K, run concurrently, each in its own output directory."""
    ks = list(ks or cfg.sweep or [cfg.k])
    configs = [cfg.model_copy(update={"k": k, "sweep": None, "out": Path(cfg.out) / f"K{k}"})
               for k in ks]
    with ThreadPoolExecutor(max_workers=min(len(configs), cfg.workers)) as executor:
        summaries = list(executor.map(run_experiment, configs))
    with stage("output"):
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        _write_csv(pd.DataFrame([s.model_dump() for s in summaries]),
                   Path(cfg.out) / "sweep_summary.csv")
    return summaries
