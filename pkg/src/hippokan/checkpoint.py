"""Versioned ``.npz`` checkpoints: every parameter array plus the full configuration."""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np

from .models import build_model

FORMAT = "hippokan-checkpoint"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, model, meta: dict | None = None) -> None:
    """Write ``model`` and free-form ``meta`` (window size, normalization, ...) to ``path``."""
    header = {"format": FORMAT, "version": VERSION, "model": model.config(), "meta": meta or {}}
    arrays = {f"param_{i:03d}": p for i, p in enumerate(model.parameters())}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), **arrays)


def load_checkpoint(path):
    """Return ``(model, meta)``; raises :class:`CheckpointError` on any malformed file."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        with np.load(path, allow_pickle=False) as npz:
            header = json.loads(str(npz["header"]))
            stored = [npz[k] for k in sorted(k for k in npz.files if k.startswith("param_"))]
    except (OSError, ValueError, KeyError, zipfile.BadZipFile, EOFError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if header.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not a {FORMAT} file")
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')!r}")
    try:
        model = build_model(header["model"], seed=None)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"bad model configuration in {path}: {exc}") from exc
    params = model.parameters()
    if len(params) != len(stored) or any(p.shape != s.shape for p, s in zip(params, stored)):
        raise CheckpointError(f"parameter arrays in {path} do not match the stored configuration")
    for p, s in zip(params, stored):
        p[...] = s
    return model, header["meta"]
