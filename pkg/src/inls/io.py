import dataclasses
import json
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .grid import Field, RadialGrid


def to_python(obj: Any) -> Any:
    """Recursively convert numpy / dataclass payloads into JSON-ready Python values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_python(obj.to_dict())
        return to_python(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_python(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_python(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _finite_or_str(float(obj))
    if isinstance(obj, float):
        return _finite_or_str(obj)
    if isinstance(obj, (np.ndarray,)):
        return to_python(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _finite_or_str(x: float) -> float | str:
    # JSON has no inf/nan literals
    return x if np.isfinite(x) else str(x)


def safe_filename(s: str) -> str:
    allowed = "-_.() "
    return "".join(c if c.isalnum() or c in allowed else "_" for c in str(s))


def dumps(payload: Any) -> str:
    return json.dumps(to_python(payload), indent=2, sort_keys=True)


def write_json(payload: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload) + "\n", encoding="utf-8")
    return path


# -------- Fields --------

def field_frame(u: Field) -> pd.DataFrame:
    vals = np.asarray(u.values)
    return pd.DataFrame({"r": u.grid.nodes, "re": vals.real, "im": np.imag(vals) if u.is_complex else 0.0})


def write_field_csv(u: Field, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    field_frame(u).to_csv(path, index=False, float_format="%.17g")
    return path


def read_field_csv(path: Path, grid: RadialGrid) -> Field:
    df = pd.read_csv(path)
    if len(df) != grid.n or not np.allclose(df["r"].to_numpy(), grid.nodes, rtol=1e-12, atol=0.0):
        raise ValueError(f"{path} does not match the grid ({grid.n} nodes, r_max={grid.r_max})")
    im = df["im"].to_numpy()
    vals = df["re"].to_numpy() + 1j * im if np.any(im != 0.0) else df["re"].to_numpy()
    return Field(grid, vals)


def write_frame_csv(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.17g")
    return path
