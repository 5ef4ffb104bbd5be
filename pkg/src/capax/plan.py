"""Dataset planning: stratified selection, group-exclusive holdout, nested subsamples, folds.

All randomness is driven by ``random.Random`` seeded from a study seed, so a
plan is reproducible byte-for-byte from (inventory, sizes, seed).
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InsufficientGroups, InsufficientImages, NonIntegralSplit, SizeExceedsRoot
from .inventory import ImageRef, PatientRecord

FOLD_MODES = ("auto", "grouped", "imagewise")


def _child_seed(seed: int, label: str) -> int:
    """Derive a stable sub-seed for one planning stage."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def stratified_select(patient: PatientRecord, k: int = 100) -> tuple[ImageRef, ...]:
    """Pick k images regularly spaced over the patient's slice-major grid.

    The i-th selected image (i counted from 1) sits at 1-based linear
    position floor(i * total / k), shifted to 0-based indexing. Positions are
    strictly increasing whenever total >= k, so the selection is duplicate
    free and covers every slice approximately evenly.
    """
    total = patient.total_images
    if total < k:
        raise InsufficientImages(
            f"patient {patient.patient_id}: {total} images < selection count {k}"
        )
    return tuple(patient.ref_at(i * total // k - 1) for i in range(1, k + 1))


def holdout_split(
    patients: list[PatientRecord] | tuple[PatientRecord, ...],
    dev_fraction: float = 0.8,
    seed: int = 0,
) -> tuple[list[PatientRecord], list[PatientRecord]]:
    """Split patients into disjoint development and test groups.

    The split is whole-patient, so no patient's images can leak across the
    boundary. Requires len(patients) * dev_fraction to be a whole number.
    """
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError(f"dev_fraction must be in (0, 1), got {dev_fraction}")
    n_dev_real = len(patients) * dev_fraction
    n_dev = round(n_dev_real)
    if abs(n_dev_real - n_dev) > 1e-9 or n_dev in (0, len(patients)):
        raise NonIntegralSplit(
            f"{len(patients)} patients at fraction {dev_fraction} gives {n_dev_real} dev patients"
        )
    order = list(patients)
    random.Random(seed).shuffle(order)
    return order[:n_dev], order[n_dev:]


@dataclass(frozen=True)
class DatasetPlan:
    """Nested dev/test memberships and fold labels for every dataset size.

    ``dev_order`` and ``test_order`` keep images in draw order: whole
    patients first, with at most one partially drawn patient at the tail.
    The set-valued views are derived from them.
    """

    seed: int
    dev_fraction: float
    images_per_patient: int
    dataset_sizes: tuple[int, ...]
    patients: tuple[PatientRecord, ...]
    selected: dict[str, tuple[ImageRef, ...]]
    dev_patients: tuple[str, ...]
    test_patients: tuple[str, ...]
    dev_order: dict[int, tuple[ImageRef, ...]] = field(default_factory=dict)
    test_order: dict[int, tuple[ImageRef, ...]] = field(default_factory=dict)
    fold_assignments: dict[tuple[int, int], frozenset[ImageRef]] = field(default_factory=dict)
    fold_modes: dict[int, str] = field(default_factory=dict)
    fold_count: int = 5

    @property
    def root_size(self) -> int:
        return self.dataset_sizes[-1]

    @property
    def dev_assignments(self) -> dict[int, frozenset[ImageRef]]:
        return {size: frozenset(refs) for size, refs in self.dev_order.items()}

    @property
    def test_assignments(self) -> dict[int, frozenset[ImageRef]]:
        return {size: frozenset(refs) for size, refs in self.test_order.items()}

    def dev_count(self, size: int) -> int:
        return len(self.dev_order[size])

    def folds_for(self, size: int) -> list[frozenset[ImageRef]]:
        return [self.fold_assignments[(size, i)] for i in range(self.fold_count)]


def _integral_part(size: int, fraction: float, what: str) -> int:
    real = size * fraction
    n = round(real)
    if abs(real - n) > 1e-9:
        raise NonIntegralSplit(f"{what} of size {size} at fraction {fraction} is {real}")
    return n


def _draw_prefix(
    patient_order: tuple[str, ...],
    selected: dict[str, tuple[ImageRef, ...]],
    need: int,
    side: str,
) -> tuple[ImageRef, ...]:
    out: list[ImageRef] = []
    for pid in patient_order:
        if need == 0:
            break
        refs = selected[pid]
        take = min(len(refs), need)
        out.extend(refs[:take])
        need -= take
    if need:
        raise SizeExceedsRoot(f"{side} pool exhausted with {need} images still required")
    return tuple(out)


def make_root_plan(
    patients: list[PatientRecord],
    seed: int,
    images_per_patient: int = 100,
    dev_fraction: float = 0.8,
    fold_count: int = 5,
) -> DatasetPlan:
    """Select images and perform the group-exclusive holdout at the root size."""
    selected = {p.patient_id: stratified_select(p, images_per_patient) for p in patients}
    dev, test = holdout_split(patients, dev_fraction, _child_seed(seed, "holdout"))
    dev_ids = tuple(p.patient_id for p in dev)
    test_ids = tuple(p.patient_id for p in test)
    root = len(patients) * images_per_patient
    dev_refs = tuple(ref for pid in dev_ids for ref in selected[pid])
    test_refs = tuple(ref for pid in test_ids for ref in selected[pid])
    return DatasetPlan(
        seed=seed,
        dev_fraction=dev_fraction,
        images_per_patient=images_per_patient,
        dataset_sizes=(root,),
        patients=tuple(patients),
        selected=selected,
        dev_patients=dev_ids,
        test_patients=test_ids,
        dev_order={root: dev_refs},
        test_order={root: test_refs},
        fold_count=fold_count,
    )


def nested_subsample(root_plan: DatasetPlan, sizes: list[int] | tuple[int, ...], seed: int) -> DatasetPlan:
    """Expand a root plan with nested dev/test memberships for smaller sizes.

    Patients are drawn in one fixed seeded order per side, so the membership
    of any smaller dataset is a prefix of every larger one.
    """
    sizes = tuple(sizes)
    if list(sizes) != sorted(set(sizes)):
        raise ValueError("sizes must be strictly ascending")
    root = root_plan.root_size
    if sizes[-1] != root:
        if sizes[-1] > root:
            raise SizeExceedsRoot(f"size {sizes[-1]} exceeds root size {root}")
        raise ValueError(f"largest size must equal the root size {root}")

    dev_order = list(root_plan.dev_patients)
    test_order = list(root_plan.test_patients)
    random.Random(_child_seed(seed, "subsample-dev")).shuffle(dev_order)
    random.Random(_child_seed(seed, "subsample-test")).shuffle(test_order)
    dev_order_t = tuple(dev_order)
    test_order_t = tuple(test_order)

    dev_refs: dict[int, tuple[ImageRef, ...]] = {}
    test_refs: dict[int, tuple[ImageRef, ...]] = {}
    for size in sizes:
        n_dev = _integral_part(size, root_plan.dev_fraction, "dev split")
        dev_refs[size] = _draw_prefix(dev_order_t, root_plan.selected, n_dev, "dev")
        test_refs[size] = _draw_prefix(test_order_t, root_plan.selected, size - n_dev, "test")

    return DatasetPlan(
        seed=root_plan.seed,
        dev_fraction=root_plan.dev_fraction,
        images_per_patient=root_plan.images_per_patient,
        dataset_sizes=sizes,
        patients=root_plan.patients,
        selected=root_plan.selected,
        dev_patients=dev_order_t,
        test_patients=test_order_t,
        dev_order=dev_refs,
        test_order=test_refs,
        fold_count=root_plan.fold_count,
    )


def kfold_assign(
    dev_refs: tuple[ImageRef, ...] | list[ImageRef],
    k: int = 5,
    seed: int = 0,
    mode: str = "grouped",
) -> dict[int, frozenset[ImageRef]]:
    """Partition one dataset's dev images into k folds.

    Grouped mode keeps every patient's images in a single fold and balances
    fold image counts greedily, which is optimal up to group granularity.
    Imagewise mode deals shuffled images round-robin, so fold sizes differ by
    at most one image.
    """
    if k < 2:
        raise ValueError(f"fold count must be at least 2, got {k}")
    dev_refs = list(dev_refs)
    if mode == "imagewise":
        rng = random.Random(seed)
        order = list(dev_refs)
        rng.shuffle(order)
        folds: list[list[ImageRef]] = [[] for _ in range(k)]
        for i, ref in enumerate(order):
            folds[i % k].append(ref)
        return {i: frozenset(folds[i]) for i in range(k)}
    if mode != "grouped":
        raise ValueError(f"unknown fold mode {mode!r}")

    groups: dict[str, list[ImageRef]] = {}
    for ref in dev_refs:
        groups.setdefault(ref.patient_id, []).append(ref)
    if len(groups) < k:
        raise InsufficientGroups(f"{len(groups)} patient groups cannot fill {k} folds")

    group_ids = list(groups)
    random.Random(seed).shuffle(group_ids)
    # Stable sort by size keeps the shuffled order among equal-sized groups.
    group_ids.sort(key=lambda pid: -len(groups[pid]))
    fold_sizes = [0] * k
    folds = [[] for _ in range(k)]
    for pid in group_ids:
        target = min(range(k), key=lambda i: (fold_sizes[i], i))
        folds[target].extend(groups[pid])
        fold_sizes[target] += len(groups[pid])
    return {i: frozenset(folds[i]) for i in range(k)}


def build_plan(
    patients: list[PatientRecord],
    sizes: list[int] | tuple[int, ...],
    seed: int,
    images_per_patient: int = 100,
    dev_fraction: float = 0.8,
    fold_count: int = 5,
    fold_mode: str = "auto",
) -> DatasetPlan:
    """Build the complete dataset plan: selection, holdout, nesting, folds.

    ``fold_mode`` "auto" uses grouped folds wherever a size has at least
    ``fold_count`` contributing patients and falls back to imagewise folds
    for the small sizes where whole-patient folds are impossible.
    """
    if fold_mode not in FOLD_MODES:
        raise ValueError(f"fold_mode must be one of {FOLD_MODES}")
    root = make_root_plan(patients, seed, images_per_patient, dev_fraction, fold_count)
    plan = nested_subsample(root, sizes, seed)

    fold_assignments: dict[tuple[int, int], frozenset[ImageRef]] = {}
    fold_modes: dict[int, str] = {}
    for size in plan.dataset_sizes:
        dev = plan.dev_order[size]
        n_groups = len({ref.patient_id for ref in dev})
        if fold_mode == "auto":
            mode = "grouped" if n_groups >= fold_count else "imagewise"
        else:
            mode = fold_mode
        folds = kfold_assign(dev, fold_count, _child_seed(seed, f"folds-{size}"), mode)
        fold_modes[size] = mode
        for i, members in folds.items():
            fold_assignments[(size, i)] = members

    return DatasetPlan(
        seed=plan.seed,
        dev_fraction=plan.dev_fraction,
        images_per_patient=plan.images_per_patient,
        dataset_sizes=plan.dataset_sizes,
        patients=plan.patients,
        selected=plan.selected,
        dev_patients=plan.dev_patients,
        test_patients=plan.test_patients,
        dev_order=plan.dev_order,
        test_order=plan.test_order,
        fold_assignments=fold_assignments,
        fold_modes=fold_modes,
        fold_count=plan.fold_count,
    )


# --- manifest serialization -------------------------------------------------

MANIFEST_FORMAT = "capax-manifest"
MANIFEST_VERSION = 1


def manifest_dict(plan: DatasetPlan) -> dict:
    """Serialize a plan to the manifest structure trainers consume."""
    image_index: dict[ImageRef, int] = {}
    images = []
    patient_pos = {p.patient_id: i for i, p in enumerate(plan.patients)}
    for patient in plan.patients:
        for ref in plan.selected[patient.patient_id]:
            image_index[ref] = len(images)
            images.append(
                {
                    "patient": patient_pos[ref.patient_id],
                    "slice": ref.slice_index,
                    "phase": ref.phase_index,
                    "uri": ref.source_uri,
                }
            )

    membership = {}
    for size in plan.dataset_sizes:
        folds = [
            sorted(image_index[r] for r in plan.fold_assignments[(size, i)])
            for i in range(plan.fold_count)
        ] if (size, 0) in plan.fold_assignments else []
        membership[str(size)] = {
            "dev": [image_index[r] for r in plan.dev_order[size]],
            "test": [image_index[r] for r in plan.test_order[size]],
            "fold_mode": plan.fold_modes.get(size),
            "folds": folds,
        }

    return {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "seed": plan.seed,
        "dev_fraction": plan.dev_fraction,
        "images_per_patient": plan.images_per_patient,
        "fold_count": plan.fold_count,
        "dataset_sizes": list(plan.dataset_sizes),
        "patients": [
            {"patient_id": p.patient_id, "slices": p.slices, "phases": p.phases,
             "uri_template": p.uri_template}
            for p in plan.patients
        ],
        "dev_patients": list(plan.dev_patients),
        "test_patients": list(plan.test_patients),
        "images": images,
        "membership": membership,
    }


def manifest_json(plan: DatasetPlan) -> str:
    return json.dumps(manifest_dict(plan), sort_keys=True, separators=(",", ":")) + "\n"


def save_manifest(plan: DatasetPlan, path: str | Path) -> None:
    Path(path).write_text(manifest_json(plan))


def plan_from_manifest(data: dict) -> DatasetPlan:
    """Rebuild a DatasetPlan from a manifest dictionary."""
    if data.get("format") != MANIFEST_FORMAT:
        raise ValueError("not a capax manifest")
    patients = tuple(
        PatientRecord(
            patient_id=p["patient_id"],
            slices=p["slices"],
            phases=p["phases"],
            uri_template=p.get("uri_template", ""),
        )
        for p in data["patients"]
    )
    refs = [
        ImageRef(
            patient_id=patients[img["patient"]].patient_id,
            slice_index=img["slice"],
            phase_index=img["phase"],
            source_uri=img["uri"],
        )
        for img in data["images"]
    ]
    selected: dict[str, list[ImageRef]] = {p.patient_id: [] for p in patients}
    for ref in refs:
        selected[ref.patient_id].append(ref)

    dev_order = {}
    test_order = {}
    fold_assignments = {}
    fold_modes = {}
    for size_str, entry in data["membership"].items():
        size = int(size_str)
        dev_order[size] = tuple(refs[i] for i in entry["dev"])
        test_order[size] = tuple(refs[i] for i in entry["test"])
        if entry.get("fold_mode"):
            fold_modes[size] = entry["fold_mode"]
        for fold_idx, members in enumerate(entry.get("folds", [])):
            fold_assignments[(size, fold_idx)] = frozenset(refs[i] for i in members)

    return DatasetPlan(
        seed=data["seed"],
        dev_fraction=data["dev_fraction"],
        images_per_patient=data["images_per_patient"],
        dataset_sizes=tuple(data["dataset_sizes"]),
        patients=patients,
        selected={pid: tuple(lst) for pid, lst in selected.items()},
        dev_patients=tuple(data["dev_patients"]),
        test_patients=tuple(data["test_patients"]),
        dev_order=dev_order,
        test_order=test_order,
        fold_assignments=fold_assignments,
        fold_modes=fold_modes,
        fold_count=data["fold_count"],
    )


def load_manifest(path: str | Path) -> DatasetPlan:
    return plan_from_manifest(json.loads(Path(path).read_text()))
