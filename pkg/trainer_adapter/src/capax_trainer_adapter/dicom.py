"""Minimal DICOM reader for uncompressed little-endian files.

Covers what cine-MRI exports need: explicit and implicit VR little endian,
MONOCHROME 8/16-bit pixel data, and the handful of tags the ingest pipeline
uses. Compressed transfer syntaxes are rejected so callers can skip those
files. Not a general DICOM implementation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EXPLICIT_LE = "1.2.840.10008.1.2.1"
IMPLICIT_LE = "1.2.840.10008.1.2"

# VRs carrying a 2-byte reserved field and 4-byte length in explicit mode
_LONG_VRS = {b"OB", b"OW", b"OF", b"SQ", b"UT", b"UN"}

TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)
TAG_PATIENT_ID = (0x0010, 0x0020)
TAG_INSTANCE_NUMBER = (0x0020, 0x0013)
TAG_SLICE_LOCATION = (0x0020, 0x1041)
TAG_TRIGGER_TIME = (0x0018, 0x1060)
TAG_ROWS = (0x0028, 0x0010)
TAG_COLUMNS = (0x0028, 0x0011)
TAG_BITS_ALLOCATED = (0x0028, 0x0100)
TAG_PIXEL_REPRESENTATION = (0x0028, 0x0103)
TAG_RESCALE_INTERCEPT = (0x0028, 0x1052)
TAG_RESCALE_SLOPE = (0x0028, 0x1053)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)

_SEQ_DELIMITER = (0xFFFE, 0xE0DD)
_ITEM_TAGS = {(0xFFFE, 0xE000), (0xFFFE, 0xE00D), (0xFFFE, 0xE0DD)}


class DicomError(ValueError):
    pass


@dataclass
class DicomImage:
    patient_id: str
    instance_number: int
    slice_location: float | None
    trigger_time: float | None
    pixels: np.ndarray


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise DicomError("truncated file")
    return data


def _scan_elements(fh, explicit: bool):
    """Yield (tag, value_bytes); sequences are skipped, pixel data is last."""
    while True:
        header = fh.read(4)
        if len(header) < 4:
            return
        group, element = struct.unpack("<HH", header)
        tag = (group, element)
        if tag in _ITEM_TAGS:
            (length,) = struct.unpack("<I", _read_exact(fh, 4))
            if length and length != 0xFFFFFFFF:
                fh.seek(length, 1)
            continue
        if explicit:
            vr = _read_exact(fh, 2)
            if vr in _LONG_VRS:
                _read_exact(fh, 2)
                (length,) = struct.unpack("<I", _read_exact(fh, 4))
            else:
                (length,) = struct.unpack("<H", _read_exact(fh, 2))
            is_sequence = vr == b"SQ"
        else:
            (length,) = struct.unpack("<I", _read_exact(fh, 4))
            is_sequence = False
        if length == 0xFFFFFFFF:
            if tag == TAG_PIXEL_DATA:
                raise DicomError("encapsulated (compressed) pixel data")
            _skip_undefined_sequence(fh)
            continue
        if is_sequence:
            fh.seek(length, 1)
            continue
        yield tag, _read_exact(fh, length)
        if tag == TAG_PIXEL_DATA:
            return


def _skip_undefined_sequence(fh) -> None:
    depth = 1
    while depth:
        group, element, length = struct.unpack("<HHI", _read_exact(fh, 8))
        tag = (group, element)
        if tag == _SEQ_DELIMITER:
            depth -= 1
        elif length == 0xFFFFFFFF:
            depth += 1
        elif tag in _ITEM_TAGS:
            fh.seek(length, 1)
        else:
            fh.seek(length, 1)


def _text(value: bytes) -> str:
    return value.decode("ascii", errors="replace").strip("\x00 ").strip()


def read_dicom(path: str | Path) -> DicomImage:
    with open(path, "rb") as fh:
        preamble = fh.read(132)
        if len(preamble) < 132 or preamble[128:] != b"DICM":
            raise DicomError("missing DICM magic")

        # File meta group is always explicit little endian; read one element
        # at a time until the group changes.
        transfer_syntax = EXPLICIT_LE
        elements: dict[tuple[int, int], bytes] = {}
        while True:
            position = fh.tell()
            header = fh.read(4)
            if len(header) < 4:
                raise DicomError("no dataset")
            group = struct.unpack("<H", header[:2])[0]
            fh.seek(position)
            if group != 0x0002:
                break
            tag, value = next(_scan_elements(fh, explicit=True))
            if tag == TAG_TRANSFER_SYNTAX:
                transfer_syntax = _text(value)

        if transfer_syntax not in (EXPLICIT_LE, IMPLICIT_LE):
            raise DicomError(f"unsupported transfer syntax {transfer_syntax}")
        for tag, value in _scan_elements(fh, explicit=transfer_syntax == EXPLICIT_LE):
            elements[tag] = value

    try:
        rows = struct.unpack("<H", elements[TAG_ROWS])[0]
        cols = struct.unpack("<H", elements[TAG_COLUMNS])[0]
        bits = struct.unpack("<H", elements[TAG_BITS_ALLOCATED])[0]
        pixel_data = elements[TAG_PIXEL_DATA]
    except KeyError as exc:
        raise DicomError(f"missing required element {exc}") from exc
    signed = elements.get(TAG_PIXEL_REPRESENTATION, b"\x00\x00") == b"\x01\x00"
    if bits == 8:
        dtype = np.int8 if signed else np.uint8
    elif bits == 16:
        dtype = np.dtype("<i2") if signed else np.dtype("<u2")
    else:
        raise DicomError(f"unsupported bits allocated {bits}")
    expected = rows * cols * (bits // 8)
    if len(pixel_data) < expected:
        raise DicomError("pixel data shorter than Rows*Columns")
    pixels = np.frombuffer(pixel_data[:expected], dtype=dtype).reshape(rows, cols)
    pixels = pixels.astype(np.float32)
    slope = float(_text(elements[TAG_RESCALE_SLOPE])) if TAG_RESCALE_SLOPE in elements else 1.0
    intercept = (float(_text(elements[TAG_RESCALE_INTERCEPT]))
                 if TAG_RESCALE_INTERCEPT in elements else 0.0)
    pixels = pixels * slope + intercept

    def _float_or_none(tag):
        return float(_text(elements[tag])) if tag in elements and _text(elements[tag]) else None

    return DicomImage(
        patient_id=_text(elements.get(TAG_PATIENT_ID, b"")) or "UNKNOWN",
        instance_number=int(_text(elements.get(TAG_INSTANCE_NUMBER, b"0")) or 0),
        slice_location=_float_or_none(TAG_SLICE_LOCATION),
        trigger_time=_float_or_none(TAG_TRIGGER_TIME),
        pixels=pixels,
    )
