# app/utils/writers.py
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd
from pydantic import BaseModel

from app.schemas.reports import ArtifactEntry, RunManifest

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def write_table(df: pd.DataFrame, path: Path) -> Path:
    """UTF-8, \\n line endings, shortest round-trip float repr."""
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logger.debug(f"Wrote {len(df)} rows to {path}")
    return path


def write_json(payload: Union[BaseModel, Dict[str, Any], List[Any]], path: Path) -> Path:
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    return path


def write_text(text: str, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return path


def file_digest(path: Path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def write_manifest(out: Path, seed: int, config_digest: str, config: Dict[str, str], stages: List[str]) -> RunManifest:
    """Index every file under `out` (except the manifest itself) with its SHA-256."""
    files = [
        ArtifactEntry(path=p.relative_to(out).as_posix(), sha256=file_digest(p), bytes=p.stat().st_size)
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.name != MANIFEST_NAME
    ]
    manifest = RunManifest(seed=seed, config_digest=config_digest, config=config, stages=stages, files=files)
    write_json(manifest, out / MANIFEST_NAME)
    logger.info(f"Manifest indexes {len(files)} files in {out}")
    return manifest
