"""Run directories and run-manifest.json"""
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Union

from .config import ExperimentConfig

log = logging.getLogger(__name__)

MANIFEST_NAME = "run-manifest.json"


class RunWriter:
    """Collects the files of one run and writes its manifest

    .. code-block:: python

        writer = RunWriter("out", config, "ensemble", workers=4)
        writer.add("lattice", stats.to_csv(writer.path("ensemble-lattice.csv")))
        writer.write_manifest()

    """

    def __init__(self, out_dir: Union[str, Path], config: ExperimentConfig, command: str, workers: int = 1):
        self.out_dir = Path(out_dir)
        self.config = config
        self.command = command
        self.workers = workers
        self.outputs: Dict[str, str] = {}
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def add(self, key: str, path: Path) -> Path:
        self.outputs[key] = Path(path).relative_to(self.out_dir).as_posix()
        log.info("wrote %s", path)
        return path

    def add_all(self, files: Dict[str, Path], prefix: str = ""):
        for key, path in files.items():
            self.add(prefix + key, path)

    def manifest(self, timestamp: Optional[datetime] = None) -> Dict:
        from . import __version__

        timestamp = timestamp or datetime.now(timezone.utc)
        return {
            "version": __version__,
            "command": self.command,
            "config": self.config.to_dict(),
            "configHash": self.config.config_hash,
            "seed": self.config.seed,
            "timestamp": timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "workers": self.workers,
            "outputs": dict(sorted(self.outputs.items())),
        }

    def write_manifest(self, timestamp: Optional[datetime] = None) -> Path:
        path = self.path(MANIFEST_NAME)
        with open(path, "w") as f:
            json.dump(self.manifest(timestamp), f, indent=2, sort_keys=True)
            f.write("\n")
        return path


def read_manifest(out_dir: Union[str, Path]) -> Dict:
    with open(Path(out_dir) / MANIFEST_NAME) as f:
        return json.load(f)


def output_files(out_dir: Union[str, Path]) -> List[Path]:
    """Data files of a run directory, manifest excluded"""
    return sorted(p for p in Path(out_dir).rglob("*") if p.is_file() and p.name != MANIFEST_NAME)
