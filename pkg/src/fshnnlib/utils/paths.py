import glob
import os
import tempfile
from collections import defaultdict


def sidecar_path(path: str) -> str:
    """JSON sidecar that travels with a container file."""
    return f"{path}.json"


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write ``data`` to a temporary file next to ``path`` and rename it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def get_report_files(pattern: str) -> list[str]:
    # Sorted so aggregation does not depend on directory listing order.
    return sorted(f for f in glob.glob(pattern) if f.endswith(".json"))


def group_by_run(report_files: list[str]) -> dict[str, list[str]]:
    """
    Group report paths by run name, i.e. the basename up to the last ``_`` suffix.

    ``runs/pendulum_high.json`` and ``runs/pendulum_com.json`` both belong to
    the ``pendulum`` run.
    """
    grouped = defaultdict(list)
    for path in report_files:
        base = os.path.splitext(os.path.basename(path))[0]
        run = "_".join(base.split("_")[:-1]) or base
        grouped[run].append(path)
    return dict(sorted(grouped.items()))
