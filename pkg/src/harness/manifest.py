"""
Experiment manifest management.

Tracks an experiment's status, configuration, per-cell metadata, output
files and errors in ``<out>/manifest.json``.
"""

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

STATUSES = ("pending", "running", "completed", "failed")


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class ManifestManager:
    """Manages the manifest stored in <out_dir>/manifest.json."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    @property
    def manifest_file(self) -> Path:
        return self.out_dir / "manifest.json"

    def create_manifest(self, name: str, config: Dict[str, Any], reference_rates: Optional[Dict] = None) -> Dict:
        """Create a new manifest in the pending state."""
        manifest = {
            "experiment": name,
            "status": "pending",
            "created_at": _now(),
            "updated_at": _now(),
            "config": config,
            "cells": [],
            "outputs": [],
            "errors": [],
            "fit": None,
            "reference_rates": reference_rates or {},
        }
        self.save_manifest(manifest)
        logger.info(f"Created manifest for experiment {name}")
        return manifest

    def save_manifest(self, manifest: Dict):
        manifest["updated_at"] = _now()
        try:
            with open(self.manifest_file, "w", encoding="utf-8") as f:
                json.dump(manifest, f, indent=2)
        except OSError as e:
            logger.error(f"Error saving manifest in {self.out_dir}: {e}")
            raise

    def load_manifest(self) -> Optional[Dict]:
        if not self.manifest_file.exists():
            return None
        try:
            with open(self.manifest_file, "r", encoding="utf-8") as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error loading manifest in {self.out_dir}: {e}")
            return None

    def _require(self) -> Dict:
        manifest = self.load_manifest()
        if not manifest:
            raise FileNotFoundError(f"no manifest in {self.out_dir}")
        return manifest

    def update_status(self, status: str, error: Optional[str] = None):
        """Move the experiment to ``status``, recording ``error`` if given."""
        if status not in STATUSES:
            raise ValueError(f"unknown status {status!r}")
        manifest = self._require()
        manifest["status"] = status
        if error:
            manifest["errors"].append(error)
        self.save_manifest(manifest)

    def add_cells(self, cells: List[Dict[str, Any]]):
        """Record per-cell metadata (run id, horizon, seed, final regret, schedule details)."""
        manifest = self._require()
        manifest["cells"].extend(cells)
        self.save_manifest(manifest)

    def add_output(self, output_path: str):
        manifest = self._require()
        if output_path not in manifest["outputs"]:
            manifest["outputs"].append(output_path)
            self.save_manifest(manifest)

    def set_fit(self, fit: Optional[Dict[str, Any]], error: Optional[str] = None):
        """Store the fitted exponent, or the reason no fit was made."""
        manifest = self._require()
        manifest["fit"] = fit
        if error:
            manifest["errors"].append(error)
        self.save_manifest(manifest)
