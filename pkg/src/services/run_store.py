"""Run directory on disk: config.json, manifest.json, one JSON file per stage and a partial marker.

A run directory belongs to one process at a time; nothing here takes a lock.
"""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from chains.crooked_maps import theta_from_json, theta_to_json
from construction.errors import StoreError
from construction.rotation import RotationVector
from construction.shear import StageParams
from verification.reports import VerificationReport, to_plain

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"
MANIFEST_FILE = "manifest.json"
PARTIAL_FILE = "PARTIAL.json"
FORMAT_VERSION = 1


def stage_file_name(n: int) -> str:
    return f"stage_{n:03d}.json"


def stage_to_json(stage: StageParams, report: Optional[VerificationReport] = None) -> Dict[str, Any]:
    shear = None
    if stage.complete:
        shear = {"b": str(stage.b), "m": str(stage.m), "theta": theta_to_json(stage.theta)}
    return {
        "version": FORMAT_VERSION,
        "stage": stage.n,
        "N": stage.N,
        "eps": stage.eps,
        "alpha": stage.alpha.to_json(),
        "shear": shear,
        "report": report.to_json() if report is not None else None,
    }


def stage_from_json(doc: Dict[str, Any]) -> StageParams:
    shear = doc.get("shear")
    b = m = theta = None
    if shear is not None:
        b, m = int(shear["b"]), int(shear["m"])
        theta = theta_from_json(shear["theta"])
    return StageParams(int(doc["stage"]), int(doc["N"]), float(doc["eps"]),
                       RotationVector.from_json(doc["alpha"]), b, m, theta)


FLOAT_DIGITS = 17
_FLOAT_MARK = "\x00float:"
_FLOAT_TOKEN = re.compile(r'"\\u0000float:([^"]*)"')
_SPECIAL_FLOATS = {"inf": "Infinity", "-inf": "-Infinity", "nan": "NaN"}


def _mark_floats(doc: Any) -> Any:
    if isinstance(doc, dict):
        return {k: _mark_floats(v) for k, v in doc.items()}
    if isinstance(doc, (list, tuple)):
        return [_mark_floats(v) for v in doc]
    if isinstance(doc, float):
        text = format(doc, f".{FLOAT_DIGITS}g")
        if text in _SPECIAL_FLOATS:
            text = _SPECIAL_FLOATS[text]
        elif not any(c in text for c in ".e"):
            # keep integral floats floats when read back
            text += ".0"
        return _FLOAT_MARK + text
    return doc


def _dump(doc: Any) -> str:
    """JSON text with every float printed to 17 significant digits."""
    text = json.dumps(_mark_floats(doc), indent=2, sort_keys=True)
    return _FLOAT_TOKEN.sub(r"\1", text) + "\n"


class RunStore:
    """Stage files under one run directory, listed in order by the manifest."""

    def __init__(self, run_dir):
        self.run_dir = Path(run_dir)

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def _write(self, name: str, doc: Any) -> None:
        target = self.path(name)
        try:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            target.write_text(_dump(doc), encoding="utf-8")
        except OSError as exc:
            raise StoreError(f"cannot write {target}: {exc}") from exc

    def _read(self, name: str) -> Any:
        target = self.path(name)
        if not target.is_file():
            raise StoreError(f"missing file {target}")
        try:
            return json.loads(target.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise StoreError(f"corrupt file {target}: {exc}") from exc

    def save_config(self, config: Dict[str, Any]) -> None:
        self._write(CONFIG_FILE, config)

    def load_config(self) -> Dict[str, Any]:
        return self._read(CONFIG_FILE)

    def manifest(self) -> Dict[str, Any]:
        if not self.path(MANIFEST_FILE).exists():
            return {"version": FORMAT_VERSION, "stages": []}
        doc = self._read(MANIFEST_FILE)
        if not isinstance(doc.get("stages"), list):
            raise StoreError(f"corrupt file {self.path(MANIFEST_FILE)}: no stage list")
        return doc

    def save_stage(self, stage: StageParams, report: Optional[VerificationReport] = None) -> None:
        name = stage_file_name(stage.n)
        self._write(name, stage_to_json(stage, report))
        manifest = self.manifest()
        stages = [s for s in manifest["stages"] if s != name]
        if len(stages) != stage.n:
            raise StoreError(f"{self.path(MANIFEST_FILE)} lists {len(stages)} stages before stage {stage.n}")
        manifest["stages"] = stages + [name]
        self._write(MANIFEST_FILE, manifest)
        logger.info("saved %s", self.path(name))

    def _stage_docs(self) -> List[Tuple[str, Dict[str, Any]]]:
        names = self.manifest()["stages"]
        if not names:
            raise StoreError(f"{self.path(MANIFEST_FILE)} lists no stages")
        return [(name, self._read(name)) for name in names]

    def load_stages(self) -> List[StageParams]:
        stages = []
        for name, doc in self._stage_docs():
            try:
                stage = stage_from_json(doc)
            except (KeyError, TypeError, ValueError) as exc:
                raise StoreError(f"corrupt file {self.path(name)}: {exc}") from exc
            if stage.n != len(stages):
                raise StoreError(f"{self.path(name)} holds stage {stage.n}, expected {len(stages)}")
            stages.append(stage)
        return stages

    def load_reports(self) -> List[Optional[VerificationReport]]:
        reports = []
        for name, doc in self._stage_docs():
            try:
                reports.append(VerificationReport.from_json(doc["report"]) if doc.get("report") else None)
            except (KeyError, TypeError, ValueError) as exc:
                raise StoreError(f"corrupt report in {self.path(name)}: {exc}") from exc
        return reports

    def mark_partial(self, property_id: str, message: str, counterexample: Any = None) -> None:
        doc = {"property": property_id, "message": message, "counterexample": counterexample}
        self._write(PARTIAL_FILE, to_plain(doc))
        logger.warning("run %s marked partial: %s", self.run_dir, message)

    def partial(self) -> Optional[Dict[str, Any]]:
        if not self.path(PARTIAL_FILE).exists():
            return None
        return self._read(PARTIAL_FILE)
