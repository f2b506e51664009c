import hashlib
import json
import math
from pathlib import Path
from typing import Any


def derive_seed(master_seed: int, index: int) -> int:
    """64-bit seed for stream `index`, independent of the order streams are consumed in."""
    digest = hashlib.sha256(f"{master_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def dump_json(value: Any) -> str:
    # NaN has no JSON spelling; undefined values are written as null
    return json.dumps(_json_safe(value), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, value: Any) -> Path:
    path.write_text(dump_json(value))
    return path


def format_float(value: float, digits: int = 4) -> str:
    if math.isnan(value):
        return "nan"
    return f"{value:.{digits}f}"
