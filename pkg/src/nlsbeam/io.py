"""Deterministic JSON/CSV writers and run metadata."""

import csv
import math
import os
import platform
import subprocess
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
OUT_ENV = "NLSBEAM_OUT"


def fmt_float(x):
    """17 significant digits; integral values keep a ".0" so they read back as floats."""
    text = format(float(x), ".17g")
    if "." not in text and "e" not in text and "n" not in text:
        text += ".0"
    return text


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with sorted keys and floats at 17 significant digits.

    Non-finite floats become null.
    """
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj):
    obj = dict(obj)
    obj.setdefault("schema_version", SCHEMA_VERSION)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(obj))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def write_csv(path, header, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def output_root(override=None):
    if override:
        return Path(override)
    return Path(os.environ.get(OUT_ENV, "out"))


def git_describe():
    """``git describe --always --dirty --tags`` of the source tree, or "unknown"."""
    here = Path(__file__).resolve().parent
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=here, capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() if res.returncode == 0 and res.stdout.strip() else "unknown"


def build_metadata():
    from . import _kernels
    from importlib import metadata
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "0+unknown"
    import scipy
    return {"package": "nlsbeam", "version": version, "git_describe": git_describe(),
            "kernels": _kernels.active.name, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}
