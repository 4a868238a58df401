import json
import os
from typing import Any

import numpy as np
import pandas as pd

from ..utils.paths import atomic_write_text


def _to_builtin(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def write_json(path: str, payload: dict[str, Any]) -> None:
    # Sorted keys keep reruns byte-identical.
    text = json.dumps(payload, indent=2, sort_keys=True, default=_to_builtin)
    atomic_write_text(path, text + "\n")


def read_json(path: str) -> dict[str, Any]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"JSON file '{path}' not found.")
    with open(path, encoding="utf-8") as f:
        data: dict[str, Any] = json.load(f)
    return data


def write_csv(path: str, frame: pd.DataFrame) -> None:
    atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g"))


def curve_frame(name: str, times: np.ndarray, values: np.ndarray) -> pd.DataFrame:
    """Two-column curve (time, value) as written for loss and metric curves."""
    return pd.DataFrame({"time": np.asarray(times), name: np.asarray(values)})
