"""Config files, CSV ingestion/emission and run manifests."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .exceptions import InvalidArgumentError
from .sampler import ModelConfig


@dataclass
class RunConfig:
    """Everything a CLI command reads from the config file.

    Model keys mirror :class:`ModelConfig`; the rest drive data simulation
    and output.
    """

    model: ModelConfig = field(default_factory=ModelConfig)
    n: int = 100
    ids: tuple = (2, 6, 8, 9)
    replicates: int = 5
    lam: float = 3.0
    noise_sd: float = 2.0
    n_total: int = 100
    n_train: int = 50
    level: float = 0.95
    band_level: float = 0.9
    z_quantiles: tuple = (0.25, 0.5, 0.75)
    y_grid_size: int = 512
    n_draws: int = 10
    phi_values: tuple = (0.01, 0.1)
    c_values: tuple = (0.1, 1.0, 25.0, 100.0)

    def echo(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "model"}
        out.update(self.model.echo())
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


_MODEL_KEYS = {f.name: f for f in fields(ModelConfig) if f.name not in ("mean_y", "mean_z")}
_RUN_KEYS = {f.name: f for f in fields(RunConfig) if f.name != "model"}
_INT_KEYS = {"G", "iters", "burn_in", "thin", "seed", "n", "replicates", "n_total", "n_train",
             "y_grid_size", "n_draws"}


def _convert(key: str, raw: str):
    default = _RUN_KEYS[key].default if key in _RUN_KEYS else None
    try:
        if isinstance(default, tuple):
            items = [v.strip() for v in raw.split(",") if v.strip()]
            cast = int if key == "ids" else float
            return tuple(cast(v) for v in items)
        if key == "seed" and raw.strip().lower() in ("none", ""):
            return None
        if key in _INT_KEYS:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(raw)
    except ValueError:
        raise InvalidArgumentError(f"config key {key!r}: cannot parse value {raw!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines. ``#`` starts a comment; unknown keys fail."""
    model_kw, run_kw = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in _MODEL_KEYS:
            model_kw[key] = _convert(key, raw)
        elif key in _RUN_KEYS:
            run_kw[key] = _convert(key, raw)
        else:
            raise InvalidArgumentError(f"{source}:{lineno}: unknown config key {key!r}")
    try:
        model = ModelConfig(**model_kw)
    except InvalidArgumentError as err:
        raise InvalidArgumentError(f"{source}: {err}") from None
    cfg = RunConfig(model=model, **run_kw)
    validate_run_config(cfg)
    return cfg


def validate_run_config(cfg: RunConfig):
    for key in ("n", "n_total", "y_grid_size"):
        if getattr(cfg, key) < 2:
            raise InvalidArgumentError(f"config key {key!r} must be >= 2")
    if cfg.replicates < 0 or cfg.n_draws < 1:
        raise InvalidArgumentError("replicates must be >= 0 and n_draws >= 1")
    if not 0 < cfg.n_train < cfg.n_total:
        raise InvalidArgumentError("config key 'n_train' must lie in (0, n_total)")
    for key in ("level", "band_level"):
        if not 0 < getattr(cfg, key) < 1:
            raise InvalidArgumentError(f"config key {key!r} must lie in (0, 1)")
    if any(not 0 < q < 1 for q in cfg.z_quantiles):
        raise InvalidArgumentError("config key 'z_quantiles' must lie in (0, 1)")
    if any(v <= 0 for v in cfg.phi_values + cfg.c_values):
        raise InvalidArgumentError("phi_values and c_values must be positive")


def load_config(path: Optional[os.PathLike]) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise InvalidArgumentError(f"cannot read config {path}: {err}") from None
    return parse_config_text(text, str(path))


def read_csv(path: os.PathLike, allow_empty: bool = False) -> dict:
    """Read a headed, comma-separated file of reals into ``{column: array}``."""
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as err:
        raise InvalidArgumentError(f"cannot read {path}: {err}") from None
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise InvalidArgumentError(f"{path}: empty file (a header row is required)")
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise InvalidArgumentError(f"{path}: duplicate column names in header")
        rows = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise InvalidArgumentError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise InvalidArgumentError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if not all(np.isfinite(values)):
                raise InvalidArgumentError(f"{path}:{lineno}: non-finite value in {row!r}")
            rows.append(values)
    if not rows and not allow_empty:
        raise InvalidArgumentError(f"{path}: no data rows")
    table = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: table[:, j] for j, name in enumerate(header)}


def read_single_column(path: os.PathLike) -> np.ndarray:
    cols = read_csv(path)
    if len(cols) != 1:
        raise InvalidArgumentError(f"{path}: expected a single column, got {list(cols)}")
    return next(iter(cols.values()))


def predictor_columns(cols: dict, path) -> list:
    names = [k for k in cols if k == "z" or (k.startswith("z") and k[1:].isdigit())]
    if not names:
        raise InvalidArgumentError(f"{path}: no predictor column (expected 'z' or 'z1', 'z2', ...)")
    return names


def format_value(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def write_csv(path: os.PathLike, columns: dict) -> Path:
    """Write equal-length columns with 17 significant digits."""
    path = Path(path)
    names = list(columns)
    data = [np.atleast_1d(columns[k]) for k in names]
    length = len(data[0]) if data else 0
    if any(len(c) != length for c in data):
        raise InvalidArgumentError("all CSV columns must have equal length")
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(names)
        for i in range(length):
            writer.writerow([format_value(c[i]) for c in data])
    return path


def write_rows(path: os.PathLike, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: os.PathLike, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


class Manifest:
    """Collects run metadata and the list of emitted files."""

    def __init__(self, command: str, cfg: RunConfig, seed):
        from . import __version__

        self.data = {
            "command": command,
            "version": __version__,
            "seed": seed,
            "config": cfg.echo(),
            "started": datetime.now(timezone.utc).isoformat(),
            "chains": [],
            "outputs": [],
        }

    def add_chain(self, label: str, chain_manifest: dict):
        entry = {"label": label}
        entry.update({k: chain_manifest[k] for k in
                      ("seed", "step_seconds", "wall_seconds", "lengthscale_acceptance", "n_retained")
                      if k in chain_manifest})
        self.data["chains"].append(entry)

    def add_output(self, path):
        self.data["outputs"].append(str(path))

    def write(self, out_dir: os.PathLike) -> Path:
        path = Path(out_dir) / "manifest.json"
        self.data["ended"] = datetime.now(timezone.utc).isoformat()
        if str(path) not in self.data["outputs"]:
            self.data["outputs"].append(str(path))
        return write_json(path, self.data)
