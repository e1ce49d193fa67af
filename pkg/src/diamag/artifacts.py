"""Deterministic CSV and JSON artifacts with embedded provenance."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

__all__ = ["write_csv", "write_json", "canonical_json", "sha256_text"]

FORMAT_VERSION = 1


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows, config_text: str, command: str) -> Path:
    """CSV with header row plus a ``.meta.json`` sidecar holding config and hash."""
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    text = buf.getvalue()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    meta = {"artifact": path.name, "command": command, "config": config_text,
            "sha256": sha256_text(text), "format_version": FORMAT_VERSION, "rows": len(rows)}
    with open(path.with_suffix(".meta.json"), "w", encoding="utf-8") as fh:
        fh.write(canonical_json(meta))
    return path


def write_json(path, payload, config_text: str, command: str) -> Path:
    """JSON document ``{payload, config, sha256}``; the hash covers the payload."""
    path = Path(path)
    body = _plain(payload)
    doc = {"command": command, "config": config_text, "format_version": FORMAT_VERSION,
           "payload": body, "sha256": sha256_text(canonical_json(body))}
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
    return path
