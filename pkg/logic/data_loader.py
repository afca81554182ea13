import json
import hashlib
import logging
import platform
from importlib import metadata
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import pandas as pd

from logic.config import RunConfig, config_hash, dump_config, parse_config

log = logging.getLogger(__name__)

# Scenario files live in project_root/data
DATA_DIR = Path(__file__).resolve().parents[1] / "data"
SCENARIO_SUFFIX = ".cfg"

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"
REPORTED_PACKAGES = ("numpy", "scipy", "pandas", "plotly", "click", "python-json-logger")


def resolve_scenario(name: Union[str, Path]) -> Path:
    """
    A path that exists is used as is; otherwise a bare name such as
    "duffing_d1e-3" or "duffing_d1e-3.cfg" is looked up in DATA_DIR.
    """
    path = Path(name)
    if path.exists():
        return path
    candidate = DATA_DIR / path.name
    if candidate.suffix != SCENARIO_SUFFIX:
        candidate = candidate.with_name(candidate.name + SCENARIO_SUFFIX)
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"no config file or scenario named {name!r}")


def list_scenarios() -> list:
    return sorted(p.stem for p in DATA_DIR.glob(f"*{SCENARIO_SUFFIX}"))


def load_config(name: Union[str, Path]) -> RunConfig:
    path = resolve_scenario(name)
    return parse_config(path.read_text(encoding="utf-8"))


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_table(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """CSV with every float at 17 significant digits, columns in frame order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def package_versions(names: Iterable[str] = REPORTED_PACKAGES) -> Dict[str, Optional[str]]:
    versions = {}
    for name in names:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    versions["python"] = platform.python_version()
    return versions


def write_manifest(out_dir: Union[str, Path], config: Optional[RunConfig],
                   files: Iterable[Union[str, Path]], command: str) -> Path:
    """
    manifest.json lists the config hash, package versions and every emitted
    file (relative to out_dir) with its sha256. The canonical config text
    is saved next to it as config.cfg and listed too.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [Path(f) for f in files]
    if config is not None:
        cfg_path = out_dir / "config.cfg"
        cfg_path.write_text(dump_config(config), encoding="utf-8")
        files.append(cfg_path)

    entries = {}
    for f in sorted(set(files)):
        try:
            rel = f.relative_to(out_dir)
        except ValueError:
            rel = f
        entries[rel.as_posix()] = sha256_file(f)

    manifest = {
        "command": command,
        "config_hash": config_hash(config) if config is not None else None,
        "versions": package_versions(),
        "files": entries,
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("manifest written", extra={"path": str(path), "files": len(entries)})
    return path


if __name__ == "__main__":
    for name in list_scenarios():
        print(name, config_hash(load_config(name))[:12])
