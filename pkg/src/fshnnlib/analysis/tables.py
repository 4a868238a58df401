import logging

import numpy as np
import pandas as pd

from ..utils.paths import get_report_files, group_by_run
from .metrics import load_report_summary

logger = logging.getLogger(__name__)

RESOLUTION_ORDER = ["Low", "Med", "High", "Com."]
MODEL_ORDER = ["mlp", "hnn", "fs_hnn"]
MODEL_NAMES = {"mlp": "MLP", "hnn": "HNN", "fs_hnn": "FS-HNN"}


def resolution_label(intervals: list[int], component: int | None) -> str:
    """
    Row label of a rollout: ``Com.`` for the combined model, otherwise the
    component's resolution. With three intervals the finest is ``High``,
    the middle one ``Med`` and the coarsest ``Low``; other counts fall back to
    ``I=<interval>``.
    """
    if component is None:
        return "Com."
    if not 0 <= component < len(intervals):
        raise ValueError(f"Component {component} out of range for intervals {intervals}.")
    if len(intervals) == 3:
        return ("High", "Med", "Low")[component]
    return f"I={intervals[component]}"


def _resolution_key(label: str) -> tuple[int, float]:
    if label in RESOLUTION_ORDER:
        return (1, float(RESOLUTION_ORDER.index(label)))
    if label.startswith("I="):
        # Coarsest interval first, like Low before High.
        return (0, -float(label[2:]))
    return (2, 0.0)


def collect_reports(pattern: str) -> pd.DataFrame:
    """
    One row per metric report matching ``pattern``.

    Columns are the label fields (``system``, ``model``, ``resolution``,
    ``seed``, ``param_count``) plus ``run``, ``mse`` and ``divergence_step``.
    """
    files = get_report_files(pattern)
    if not files:
        raise FileNotFoundError(f"No metric reports match '{pattern}'.")
    rows = []
    for run, paths in group_by_run(files).items():
        for path in paths:
            try:
                data = load_report_summary(path)
            except ValueError:
                logger.debug("Skipping %s, not a metric report", path)
                continue
            label = data["label"]
            rows.append(
                {
                    "run": run,
                    "system": label.get("system", ""),
                    "model": label.get("model", ""),
                    "resolution": label.get("resolution", "Com."),
                    "seed": label.get("seed"),
                    "param_count": (
                        np.nan
                        if label.get("param_count") is None
                        else float(label["param_count"])
                    ),
                    "mse": np.nan if data["mse"] is None else float(data["mse"]),
                    "divergence_step": data.get("divergence_step"),
                }
            )
    logger.info("Loaded %d metric reports", len(rows))
    return pd.DataFrame(rows)


def _ordered(table: pd.DataFrame) -> pd.DataFrame:
    keys = sorted(
        table.index,
        key=lambda key: (
            MODEL_ORDER.index(key[0]) if key[0] in MODEL_ORDER else len(MODEL_ORDER),
            key[0],
            _resolution_key(key[1]),
        ),
    )
    table = table.loc[keys].reset_index()
    table["model"] = table["model"].map(lambda m: MODEL_NAMES.get(m, m))
    table.columns.name = None
    return table.rename(columns={"resolution": "res"})


def results_table(reports: pd.DataFrame) -> pd.DataFrame:
    """
    Median rollout MSE over seeds, one row per (model, resolution) and one
    column per system.

    Rows are ordered MLP, HNN, FS-HNN, and within a model Low, Med, High,
    Com. Diverged runs count as ``nan`` and are skipped by the median.
    """
    if reports.empty:
        raise ValueError("No metric reports to aggregate.")
    table = (
        reports.groupby(["model", "resolution", "system"])["mse"]
        .median()
        .unstack("system")
    )
    return _ordered(table)


def size_table(reports: pd.DataFrame) -> pd.DataFrame:
    """
    Trainable parameter count per (model, resolution) and system, laid out
    like ``results_table``.

    Single-scale FS-HNN rows share the checkpoint of the combined model and
    report its full size. Reports without a count (reference data) are
    dropped.
    """
    if reports.empty or "param_count" not in reports:
        raise ValueError("No metric reports to aggregate.")
    sized = reports.dropna(subset=["param_count"])
    if sized.empty:
        raise ValueError("No metric report carries a parameter count.")
    table = (
        sized.groupby(["model", "resolution", "system"])["param_count"]
        .max()
        .unstack("system")
    )
    return _ordered(table)


def format_table(table: pd.DataFrame, floatfmt: str = ".3e") -> str:
    """Markdown rendering for the terminal."""
    return table.to_markdown(index=False, floatfmt=floatfmt)
