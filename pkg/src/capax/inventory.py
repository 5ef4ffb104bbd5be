"""Patient and image inventory types.

A patient's acquisition is a slices x phases grid of images. Image order is
slice-major, phase-minor: all phases of slice 0, then slice 1, and so on.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_URI_TEMPLATE = "images/{patient_id}/s{slice_index:03d}_p{phase_index:03d}.raw"


@dataclass(frozen=True, slots=True)
class ImageRef:
    """One image inside a patient's acquisition grid."""

    patient_id: str
    slice_index: int
    phase_index: int
    source_uri: str


@dataclass(frozen=True)
class PatientRecord:
    """A patient with a complete slices x phases acquisition.

    ``explicit_refs``, when given, must enumerate the full grid in
    slice-major order; otherwise refs are generated from ``uri_template``.
    """

    patient_id: str
    slices: int
    phases: int
    uri_template: str = DEFAULT_URI_TEMPLATE
    explicit_refs: tuple[ImageRef, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.slices <= 0 or self.phases <= 0:
            raise ValueError(f"patient {self.patient_id}: slices and phases must be positive")
        if self.explicit_refs is not None and len(self.explicit_refs) != self.total_images:
            raise ValueError(
                f"patient {self.patient_id}: {len(self.explicit_refs)} refs "
                f"for a {self.slices}x{self.phases} grid"
            )

    @property
    def total_images(self) -> int:
        return self.slices * self.phases

    def ref_at(self, position: int) -> ImageRef:
        """Image at 0-based linear position in slice-major order."""
        if not 0 <= position < self.total_images:
            raise IndexError(f"position {position} outside grid of {self.total_images}")
        if self.explicit_refs is not None:
            return self.explicit_refs[position]
        slice_index, phase_index = divmod(position, self.phases)
        return ImageRef(
            patient_id=self.patient_id,
            slice_index=slice_index,
            phase_index=phase_index,
            source_uri=self.uri_template.format(
                patient_id=self.patient_id, slice_index=slice_index, phase_index=phase_index
            ),
        )

    @property
    def image_refs(self) -> tuple[ImageRef, ...]:
        """The full acquisition grid, slice-major."""
        return tuple(self.ref_at(i) for i in range(self.total_images))


def demo_inventory(
    n_patients: int,
    seed: int,
    slices_range: tuple[int, int] = (8, 24),
    phases_range: tuple[int, int] = (18, 35),
) -> list[PatientRecord]:
    """Generate a synthetic patient inventory with realistic grid sizes.

    The default ranges guarantee at least 8x18 = 144 images per patient,
    enough for the standard 100-image selection.
    """
    rng = random.Random(seed)
    patients = []
    for i in range(n_patients):
        patients.append(
            PatientRecord(
                patient_id=f"P{i + 1:04d}",
                slices=rng.randint(*slices_range),
                phases=rng.randint(*phases_range),
            )
        )
    return patients


def load_inventory(path: str | Path) -> list[PatientRecord]:
    """Read a patient inventory from JSON.

    Accepts either a bare list of patient objects or ``{"patients": [...]}``.
    """
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data["patients"]
    patients = []
    for entry in data:
        patients.append(
            PatientRecord(
                patient_id=str(entry["patient_id"]),
                slices=int(entry["slices"]),
                phases=int(entry["phases"]),
                uri_template=entry.get("uri_template", DEFAULT_URI_TEMPLATE),
            )
        )
    return patients


def save_inventory(patients: list[PatientRecord], path: str | Path) -> None:
    payload = {
        "patients": [
            {
                "patient_id": p.patient_id,
                "slices": p.slices,
                "phases": p.phases,
                "uri_template": p.uri_template,
            }
            for p in patients
        ]
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
