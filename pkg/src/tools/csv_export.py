"""
Result Writers
CSV tables (pandas), text reports and JSON solution files, each opened with
the same provenance header so that any output can be traced to its run.
"""

import hashlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..config.settings import get_settings
from ..models.schemas import RunConfig

logger = logging.getLogger(__name__)
settings = get_settings()

PROVENANCE_PREFIX = "# provenance:"


def config_hash(config: RunConfig) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def provenance_lines(config: RunConfig, command: str, seed: Optional[int] = None) -> List[str]:
    tol = config.tolerances.model_dump(mode="json")
    tolerances = ",".join(f"{k}={tol[k]:.3g}" for k in sorted(tol))
    return [
        f"{PROVENANCE_PREFIX} command={command} config_hash={config_hash(config)}",
        f"{PROVENANCE_PREFIX} K={config.K} T={config.T:.17g} mode={config.mode} seed={'' if seed is None else seed}",
        f"{PROVENANCE_PREFIX} tolerances {tolerances}",
    ]


def read_provenance(path: Path) -> Dict[str, str]:
    """key=value pairs from the provenance header of an output file."""
    fields: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith(PROVENANCE_PREFIX):
                break
            for token in line[len(PROVENANCE_PREFIX):].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    fields[key] = value
    return fields


def _clean(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


class ResultWriter:
    """Writes every output of one command run into a directory."""

    def __init__(self, out_dir: Path, config: RunConfig, command: str, seed: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.command = command
        self.header = provenance_lines(config, command, seed)
        self.digits = settings.csv_digits
        self.written: List[Path] = []

    def _open(self, name: str):
        path = self.out_dir / name
        self.written.append(path)
        fh = open(path, "w", encoding="utf-8", newline="")
        fh.write("\n".join(self.header) + "\n")
        return path, fh

    def write_table(self, name: str, rows: Sequence[Dict[str, Any]],
                    columns: Optional[Sequence[str]] = None) -> Path:
        """Comma-separated table with a header row and full-precision floats."""
        frame = pd.DataFrame([{k: _clean(v) for k, v in r.items()} for r in rows], columns=columns)
        path, fh = self._open(name)
        with fh:
            frame.to_csv(fh, index=False, float_format=f"%.{self.digits}g", lineterminator="\n")
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        path, fh = self._open(name)
        with fh:
            frame.to_csv(fh, index=False, float_format=f"%.{self.digits}g", lineterminator="\n")
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_lines(self, name: str, lines: Iterable[str]) -> Path:
        path, fh = self._open(name)
        with fh:
            for line in lines:
                fh.write(f"{line}\n")
        logger.info(f"Wrote report {path}")
        return path

    def write_json(self, name: str, payload: str) -> Path:
        """JSON body; the provenance header is carried inside the document."""
        path = self.out_dir / name
        self.written.append(path)
        path.write_text(payload + "\n", encoding="utf-8")
        logger.info(f"Wrote {path}")
        return path


def sample_table(times: np.ndarray, xs: np.ndarray, values: np.ndarray, label: str = "v") -> pd.DataFrame:
    """Long-form (t, x, value) table from a (len t, len x) array."""
    tt, xx = np.meshgrid(times, xs, indexing="ij")
    return pd.DataFrame({"t": tt.ravel(), "x": xx.ravel(), label: np.asarray(values, dtype=float).ravel()})


def read_table(path: Path) -> pd.DataFrame:
    """CSV written by ResultWriter, skipping the provenance header."""
    return pd.read_csv(path, skiprows=_header_length(path), float_precision="round_trip")


def _header_length(path: Path) -> int:
    count = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith(PROVENANCE_PREFIX):
                break
            count += 1
    return count
