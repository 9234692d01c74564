"""Reads DICOM files with pydicom and prints what it sees as JSON.

Usage: dicom_oracle.py FILE...  -> one JSON object per line.
"""

import hashlib
import json
import sys

import pydicom
from pydicom import config
from pydicom.encaps import generate_fragments

config.settings.reading_validation_mode = config.RAISE

ATTRIBUTES = [
    "PatientID",
    "PatientName",
    "PatientSex",
    "StudyDate",
    "StudyTime",
    "StudyDescription",
    "Modality",
    "SOPClassUID",
    "SOPInstanceUID",
    "StudyInstanceUID",
    "SeriesInstanceUID",
    "PhotometricInterpretation",
]


def describe(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    ds = pydicom.dcmread(path)

    modality = ds.get_item((0x0008, 0x0060))
    start = modality.value_tell - 8
    modality_hex = raw[start : modality.value_tell + modality.length].hex()

    out = {"path": path, "ok": True}
    for name in ATTRIBUTES:
        value = ds.get(name)
        out[name] = None if value is None else str(value)
    out["Rows"] = int(ds.Rows)
    out["Columns"] = int(ds.Columns)
    out["SamplesPerPixel"] = int(ds.SamplesPerPixel)
    out["TransferSyntaxUID"] = str(ds.file_meta.TransferSyntaxUID)
    out["MediaStorageSOPInstanceUID"] = str(ds.file_meta.MediaStorageSOPInstanceUID)
    out["ModalityElementHex"] = modality_hex

    items = list(generate_fragments(ds.PixelData))
    out["BasicOffsetTableLength"] = len(items[0]) if items else None
    fragments = items[1:]
    out["FragmentCount"] = len(fragments)
    fragment = fragments[0] if fragments else b""
    out["FragmentLength"] = len(fragment)
    out["FragmentSha256"] = hashlib.sha256(fragment).hexdigest()
    out["FragmentSha256Unpadded"] = hashlib.sha256(fragment[:-1]).hexdigest() if fragment else ""

    try:
        out["PixelShape"] = list(ds.pixel_array.shape)
    except Exception as exc:  # decoder plugins are optional
        out["PixelShape"] = None
        out["PixelError"] = str(exc)
    return out


def main(paths):
    status = 0
    for path in paths:
        try:
            result = describe(path)
        except Exception as exc:
            result = {"path": path, "ok": False, "error": f"{type(exc).__name__}: {exc}"}
            status = 1
        print(json.dumps(result, sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
