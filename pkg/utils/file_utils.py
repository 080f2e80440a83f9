# utils/file_utils.py
import os
import json
import hashlib
import tempfile

import numpy as np
import pandas as pd

from utils.errors import ArtifactWriteError
from utils.log_utils import get_logger

logger = get_logger("io")

MANIFEST_NAME = "manifest.json"


# ------------------------------
# Hashing Utilities
# ------------------------------

def compute_file_hash(file_path: str) -> str:
    """Compute MD5 hash for a given file path."""
    hash_md5 = hashlib.md5()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(4096), b""):
            hash_md5.update(chunk)
    return hash_md5.hexdigest()


# ------------------------------
# Atomic Writes
# ------------------------------

def write_atomic(path: str, text: str) -> str:
    """Write text to a temp file in the target directory, then rename over path."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(tmp_path, path)
        finally:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
    except OSError as e:
        raise ArtifactWriteError(f"cannot write {path}: {e}", path=path) from e
    return path


def _default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def to_json(payload) -> str:
    # NaN is emitted as null so every artefact stays strict JSON
    return json.dumps(_nan_to_none(payload), indent=2, sort_keys=False, ensure_ascii=False, default=_default) + "\n"


def _nan_to_none(value):
    if isinstance(value, dict):
        return {k: _nan_to_none(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_nan_to_none(v) for v in value]
    if isinstance(value, (float, np.floating)) and not np.isfinite(value):
        return None
    return value


def write_json(path: str, payload) -> str:
    return write_atomic(path, to_json(payload))


def write_csv(path: str, frame: pd.DataFrame) -> str:
    return write_atomic(path, frame.to_csv(index=False, lineterminator="\n", float_format="%.10g"))


def write_manifest(out_dir: str, paths) -> str:
    """Record the MD5 of every artefact a command produced."""
    entries = {
        os.path.relpath(p, out_dir): compute_file_hash(p)
        for p in sorted(paths)
    }
    manifest = write_json(os.path.join(out_dir, MANIFEST_NAME), {"artifacts": entries})
    logger.info(f"✅ Wrote {len(entries)} artefact(s) to {out_dir}")
    return manifest
