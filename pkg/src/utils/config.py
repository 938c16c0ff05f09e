# config.py
import logging
import os
import re
from pathlib import Path
from typing import Dict, Optional

from src.utils.preprocess import content_lines

# Dense simulation limit: 2^n x 2^n complex matrices
MAX_QUBITS = 12

# Run defaults (fixed T=50, mixer scale 5)
DEFAULT_T = 50.0
DEFAULT_K = 160
DEFAULT_MIXER_SCALE = 5.0
SNAPSHOTS_PER_RUN = 100

# Numerical tolerances
STEP_UNITARITY_TOL = 1e-10
UNITARITY_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-8
DEGENERACY_TOL = 1e-10

# Tracking diagnostics
MANIFOLD_WEIGHT = 0.9
CONTINUITY_FACTOR = 10.0
CONFIDENCE_FLOOR = 0.5

DEFAULT_WORKERS = min(4, os.cpu_count() or 1)

PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent
GRAPH_DIR = PROJECT_ROOT / "data" / "graphs"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_CONFIG_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_\-]*)\s*=\s*(.*)$")

# Config keys holding input file paths
PATH_KEYS = ("graph", "graph_path")


def setup_logging(level: str = "INFO") -> None:
    """Configure the root logger once for command-line use."""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment."""
    values = {}
    for lineno, line in content_lines(text):
        match = _CONFIG_LINE.match(line)
        if not match:
            raise ValueError(f"Malformed config line {lineno}: {line!r}")
        key = match.group(1).replace("-", "_").lower()
        values[key] = match.group(2).strip()
    return values


def load_config_file(path: Optional[Path]) -> Dict[str, str]:
    """Read a config file; relative graph paths are taken from the file's directory."""
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found at {path}")
    values = parse_config_text(path.read_text(encoding="ascii"))
    for key in PATH_KEYS:
        if key in values and not Path(values[key]).is_absolute():
            values[key] = str(path.parent / values[key])
    return values
