"""
Result writers
CSV for figure tables, JSON for run documents and metadata sidecars
"""

import json
import platform
import sys
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import pandas as pd
import scipy
import yaml
from loguru import logger

from utils.config import config_digest, flatten_config


def _to_builtin(value: Any):
    """json.dumps fallback for numpy scalars and arrays"""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps_json(document: Mapping[str, Any]) -> str:
    """Stable JSON text: sorted keys, UTF-8, trailing newline"""
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False, default=_to_builtin) + "\n"


def write_json(document: Mapping[str, Any], path: Optional[Path] = None) -> Optional[Path]:
    """
    Write a JSON document to path, or to stdout when path is None

    Returns:
        The path written, or None for stdout
    """
    text = dumps_json(document)
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    logger.info(f"Wrote {path}")
    return path


def write_table(table: pd.DataFrame, path: Path) -> Path:
    """Write a figure table as CSV with a header row and LF line endings"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    logger.info(f"Wrote {path} ({len(table)} rows)")
    return path


def package_versions() -> Dict[str, str]:
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'pyyaml': yaml.__version__,
    }


def metadata(config: Mapping[str, Any], seeds: List[int]) -> Dict[str, Any]:
    """Sidecar contents: config hash, the config itself, seeds and versions"""
    return {
        'config_sha256': config_digest(config),
        'config': flatten_config(config),
        'seeds': list(seeds),
        'versions': package_versions(),
    }


def write_figure(name: str, table: pd.DataFrame, config: Mapping[str, Any], out_dir: Path) -> Path:
    """Write <name>.csv plus its <name>.json metadata sidecar"""
    out_dir = Path(out_dir)
    csv_path = write_table(table, out_dir / f"{name}.csv")
    seeds = [int(s) for s in table['seed']] if 'seed' in table else []
    write_json(metadata(config, seeds), out_dir / f"{name}.json")
    return csv_path
