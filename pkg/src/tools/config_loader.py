"""
Run Configuration Loader
Reads a JSON RunConfig, applies command-line overrides, and reports syntax
and validation failures with line/column references into the file.
"""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from ..core.exceptions import ConfigError
from ..models.schemas import RunConfig

logger = logging.getLogger(__name__)


def _line_col(text: str, offset: int) -> Tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def locate_key(text: str, loc: Sequence[Union[str, int]]) -> Optional[Tuple[int, int]]:
    """Best-effort (line, column) of the deepest named key of a validation path."""
    offset = 0
    found: Optional[int] = None
    for part in loc:
        if not isinstance(part, str):
            continue
        match = re.compile(r'"' + re.escape(part) + r'"\s*:').search(text, offset)
        if match is None:
            break
        found = match.start()
        offset = match.end()
    if found is None:
        return None
    return _line_col(text, found)


def format_validation_error(text: str, error: ValidationError, source: str) -> List[str]:
    lines = []
    for item in error.errors():
        loc = item.get("loc", ())
        where = locate_key(text, loc)
        path = ".".join(str(p) for p in loc) or "<root>"
        position = f"line {where[0]}, column {where[1]}" if where else "location unknown"
        lines.append(f"{source}: {position}: {path}: {item.get('msg', 'invalid value')}")
    return lines


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """RunConfig from JSON text; every failure is a ConfigError naming line and column."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"Config syntax error in {source} at line {e.lineno}, column {e.colno}")
        raise ConfigError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: line 1, column 1: top level must be an object", 1, 1)
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        lines = format_validation_error(text, e, source)
        logger.error(f"Config validation failed in {source}: {len(lines)} error(s)")
        first = locate_key(text, e.errors()[0].get("loc", ())) or (0, 0)
        raise ConfigError("\n".join(lines), first[0], first[1]) from e


def apply_overrides(config: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """Copy of config with the non-None overrides validated in."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    if not updates:
        return config
    data = config.model_dump(mode="json")
    data.update(updates)
    try:
        merged = RunConfig.model_validate(data)
    except ValidationError as e:
        detail = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"command-line override rejected: {detail}") from e
    logger.debug(f"Applied overrides {sorted(updates)}")
    return merged


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file not found")
    text = path.read_text(encoding="utf-8")
    config = parse_config(text, str(path))
    config = apply_overrides(config, overrides or {})
    logger.info(f"Loaded config {path}: K={config.K}, T={config.T}, mode={config.mode}")
    return config


def dump_config(config: RunConfig) -> str:
    return config.model_dump_json(indent=2)
