import logging
from pathlib import Path
from typing import Dict, NamedTuple, Optional

import networkx as nx

from .graph import GraphInstance, brute_force_optimum, format_edge_list

logger = logging.getLogger(__name__)


class GraphGenerationError(RuntimeError):
    pass


class PresetTarget(NamedTuple):
    n: int
    m: int
    c_star: int
    degeneracy: int


# Target (n, |E|, C*, degeneracy) per generated preset
PRESET_TARGETS: Dict[str, PresetTarget] = {
    "n5": PresetTarget(5, 6, 5, 2),
    "n7": PresetTarget(7, 8, 7, 4),
    "n10": PresetTarget(10, 25, 18, 4),
}

FIXED_PRESETS: Dict[str, GraphInstance] = {
    "k2": GraphInstance(n=2, edges=((0, 1),)),
    "k3": GraphInstance(n=3, edges=((0, 1), (1, 2), (0, 2))),
    "c5": GraphInstance(n=5, edges=((0, 1), (1, 2), (2, 3), (3, 4), (0, 4))),
    "empty2": GraphInstance(n=2, edges=()),
}

PRESET_NAMES = sorted(FIXED_PRESETS) + sorted(PRESET_TARGETS)


def random_instance(n: int, m: int, seed: int) -> GraphInstance:
    g = nx.gnm_random_graph(n, m, seed=seed)
    return GraphInstance(n=n, edges=tuple(sorted(g.edges())))


def matches_target(g: GraphInstance, target: PresetTarget) -> bool:
    oracle = brute_force_optimum(g)
    return oracle.c_star == target.c_star and oracle.degeneracy == target.degeneracy


def generate_matching_instance(target: PresetTarget, seed: int = 0,
                               max_attempts: int = 50000) -> GraphInstance:
    """Deterministic search over G(n, m) for a graph with the target optimum and degeneracy."""
    for attempt in range(max_attempts):
        g = random_instance(target.n, target.m, seed + attempt)
        if matches_target(g, target):
            logger.debug("Preset %s found at seed %d", target, seed + attempt)
            return g
    raise GraphGenerationError(
        f"No G({target.n}, {target.m}) graph with C*={target.c_star}, "
        f"degeneracy={target.degeneracy} in {max_attempts} attempts from seed {seed}"
    )


_preset_cache: Dict[str, GraphInstance] = {}


def preset_instance(name: str, seed: int = 0) -> GraphInstance:
    if name in FIXED_PRESETS:
        return FIXED_PRESETS[name]
    if name not in PRESET_TARGETS:
        raise ValueError(f"Unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    key = f"{name}:{seed}"
    if key not in _preset_cache:
        _preset_cache[key] = generate_matching_instance(PRESET_TARGETS[name], seed=seed)
    return _preset_cache[key]


def write_preset(name: str, output_path: Path, seed: int = 0) -> GraphInstance:
    g = preset_instance(name, seed=seed)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(format_edge_list(g), encoding="ascii")
    return g


if __name__ == "__main__":
    from src.utils.config import GRAPH_DIR

    for preset in PRESET_NAMES:
        path = GRAPH_DIR / f"{preset}.txt"
        instance = write_preset(preset, path)
        print(f"Generated {preset} ({instance.describe()}) at {path}")
