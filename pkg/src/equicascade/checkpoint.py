"""Single-file checkpoint container for detectors and classifiers.

Layout (documented, stable across releases): a ZIP archive, stored
uncompressed with fixed timestamps so identical contents produce
identical bytes.  Entries:

    meta.json            UTF-8 JSON: format_version (int), architecture
                         descriptor string, plus model-specific fields
                         (anchor list, input size, thresholds, ...)
    arrays/<name>.npy    one NumPy .npy (format v1) per parameter array

Entry order is meta.json first, then arrays sorted by name.
"""
from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

_EPOCH = (1980, 1, 1, 0, 0, 0)  # fixed ZIP timestamp for reproducible bytes


class CheckpointError(RuntimeError):
    """Raised for unreadable or incompatible checkpoint files."""


def save_checkpoint(path: str | Path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    payload = dict(meta)
    payload["format_version"] = FORMAT_VERSION
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        _writestr(zf, "meta.json", json.dumps(payload, sort_keys=True, indent=1).encode("utf-8"))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(arrays[name]))
            _writestr(zf, f"arrays/{name}.npy", buf.getvalue())


def _writestr(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    try:
        with zipfile.ZipFile(path, "r") as zf:
            meta = json.loads(zf.read("meta.json").decode("utf-8"))
            arrays = {}
            for entry in zf.namelist():
                if entry.startswith("arrays/") and entry.endswith(".npy"):
                    name = entry[len("arrays/"):-len(".npy")]
                    arrays[name] = np.load(io.BytesIO(zf.read(entry)), allow_pickle=False)
    except (OSError, KeyError, ValueError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint {path}: unsupported format_version {version!r}"
        )
    return meta, arrays
