# app/output_manager.py
import json
import logging
import math
import os
from datetime import datetime, timezone
from typing import Any, Dict, Mapping, Optional

import pandas as pd

from app import __version__
from app.data_types import ExperimentManifest

logger = logging.getLogger("output_manager")


def _ensure_parent(output_path: str) -> None:
    out_dir = os.path.dirname(output_path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)


def write_frame(output_path: str, frame: pd.DataFrame) -> bool:
    """
    Overwrite output_path with the frame as CSV; missing values read "nan".
    Returns True on success, False on failure.
    """
    try:
        _ensure_parent(output_path)
        frame.to_csv(output_path, index=False, na_rep="nan", lineterminator="\n")
        return True
    except OSError:
        logger.exception("Could not write table %s", output_path)
        return False


def to_jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return to_jsonable(value.item())   # numpy scalars
    return value


def dumps(payload: Mapping[str, Any]) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True)


def write_json(output_path: str, payload: Mapping[str, Any]) -> bool:
    try:
        _ensure_parent(output_path)
        with open(output_path, "w", encoding="utf-8") as f:
            f.write(dumps(payload) + "\n")
        return True
    except OSError:
        logger.exception("Could not write %s", output_path)
        return False


def build_manifest(subcommand: str, parameters: Dict[str, Any],
                   curve: Optional[Dict[str, Any]] = None) -> ExperimentManifest:
    return ExperimentManifest(
        subcommand=subcommand,
        parameters=dict(parameters),
        curve=dict(curve) if curve is not None else None,
        version=__version__,
        timestamp=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    )


def write_manifest(output_path: str, manifest: ExperimentManifest) -> bool:
    """Writes <output_path>.manifest.json next to an output file."""
    return write_json(manifest_path(output_path), manifest.to_dict())


def manifest_path(output_path: str) -> str:
    root, _ = os.path.splitext(output_path)
    return root + ".manifest.json"
