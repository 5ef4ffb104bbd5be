"""DICOM archive ingestion: per-patient series to inventory + raw payloads.

Expects an archive directory with one subdirectory per patient, each holding
that patient's DICOM files. Frames are organized into a slices x phases grid
by slice location and ordered within a slice by trigger time (falling back
to instance number); patients whose frames do not form a clean grid, and
files this reader cannot parse, are skipped with a log entry.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .dicom import DicomError, DicomImage, read_dicom
from .preprocess import preprocess
from .rawio import write_raw

logger = logging.getLogger(__name__)

URI_TEMPLATE = "images/{patient_id}/s{slice_index:03d}_p{phase_index:03d}.raw"


@dataclass(frozen=True)
class IngestedPatient:
    patient_id: str
    slices: int
    phases: int


def _grid_for_patient(frames: list[DicomImage]) -> list[list[DicomImage]] | None:
    by_location: dict[float, list[DicomImage]] = {}
    for frame in frames:
        key = round(frame.slice_location, 3) if frame.slice_location is not None else 0.0
        by_location.setdefault(key, []).append(frame)
    grid = []
    for location in sorted(by_location):
        row = sorted(
            by_location[location],
            key=lambda f: (f.trigger_time if f.trigger_time is not None else f.instance_number,
                           f.instance_number),
        )
        grid.append(row)
    phase_counts = {len(row) for row in grid}
    if len(phase_counts) != 1:
        return None
    return grid


def ingest_archive(archive: str | Path, out_dir: str | Path, target: int = 256) -> list[IngestedPatient]:
    """Convert an archive into preprocessed raw payloads plus an inventory.

    Returns the ingested patients; writes ``inventory.json`` and the image
    tree under ``out_dir``. Deterministic: directories and files are visited
    in sorted order, so re-ingesting produces identical output.
    """
    archive = Path(archive)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    patients: list[IngestedPatient] = []

    patient_dirs = sorted(p for p in archive.iterdir() if p.is_dir()) if archive.exists() else []
    for patient_dir in patient_dirs:
        frames = []
        for path in sorted(patient_dir.rglob("*.dcm")):
            try:
                frames.append(read_dicom(path))
            except (DicomError, OSError) as exc:
                logger.warning("skipping %s: %s", path, exc)
        if not frames:
            logger.warning("patient directory %s has no readable frames", patient_dir.name)
            continue
        grid = _grid_for_patient(frames)
        if grid is None:
            logger.warning("patient %s: frames do not form a slices x phases grid, skipped",
                           patient_dir.name)
            continue
        patient_id = frames[0].patient_id if frames[0].patient_id != "UNKNOWN" else patient_dir.name
        for slice_index, row in enumerate(grid):
            for phase_index, frame in enumerate(row):
                uri = URI_TEMPLATE.format(patient_id=patient_id, slice_index=slice_index,
                                          phase_index=phase_index)
                write_raw(out_dir / uri, preprocess(frame.pixels, target))
        patients.append(IngestedPatient(patient_id=patient_id, slices=len(grid),
                                        phases=len(grid[0])))

    inventory = {
        "patients": [
            {"patient_id": p.patient_id, "slices": p.slices, "phases": p.phases,
             "uri_template": URI_TEMPLATE}
            for p in patients
        ]
    }
    (out_dir / "inventory.json").write_text(json.dumps(inventory, indent=2, sort_keys=True) + "\n")
    if not patients:
        logger.warning("archive %s produced an empty inventory", archive)
    return patients
