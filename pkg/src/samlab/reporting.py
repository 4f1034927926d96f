"""Output plumbing: deterministic CSV/JSON writers with provenance comments,
config loading (TOML or JSON by extension), and config hashing."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

SCHEMA_VERSION = 1


def load_config(path: str) -> dict:
    """Read a TOML or JSON config (picked by extension) and validate the
    schema version field."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib

        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    elif ext == ".json":
        with open(path) as fh:
            cfg = json.load(fh)
    else:
        raise ValueError(f"unsupported config extension {ext!r} (use .toml or .json)")
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"config schema_version must be {SCHEMA_VERSION}, got {version!r}")
    return cfg


def config_hash(cfg: dict) -> str:
    """Stable short hash of the canonical JSON form of a config."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _atomic_write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_csv(path: str, header: list, rows: list, cfg_hash: str, seed) -> None:
    """Comma-separated output: provenance comments, header, then one line per
    row dict, floats at 17 significant digits."""
    lines = [f"#config-hash={cfg_hash}", f"#seed={seed}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in header))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: str, doc: dict, cfg_hash: str) -> None:
    doc = dict(doc)
    doc["config_hash"] = cfg_hash
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    import numpy as np

    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def output_dir(cfg: dict, override: str | None = None) -> str:
    """Resolve the output directory: CLI flag > SAMLAB_OUTPUT env > config."""
    if override:
        return override
    env = os.environ.get("SAMLAB_OUTPUT")
    if env:
        return env
    return cfg.get("output_dir", "out")
