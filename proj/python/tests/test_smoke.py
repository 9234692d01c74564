import hashlib
import hmac
import io
from pathlib import Path

import pytest

import dicoderma

FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures"


def fixture(name):
    return (FIXTURES / name).read_bytes()


LICHEN = {
    "dicoderma": "1.0",
    "PatientID": "P001",
    "PatientName": "DOE^JANE",
    "PatientSex": "F",
    "StudyDate": "20210301",
    "StudyTime": "093000",
    "StudyDescription": "lichen planus",
}


def test_roundtrip_is_byte_identical():
    for name in ["color_2x1.jpg", "gray_8x8.jpg", "progressive.jpg", "camera_le.jpg", "camera_be.jpg"]:
        data = fixture(name)
        assert dicoderma.roundtrip_jpeg(data) == data


def test_descriptor():
    assert dicoderma.image_descriptor(fixture("color_2x1.jpg")) == {
        "rows": 1,
        "columns": 2,
        "components": 3,
        "baseline": True,
        "bits_per_sample": 8,
    }
    assert not dicoderma.image_descriptor(fixture("progressive.jpg"))["baseline"]


def test_canonical_encoding():
    assert dicoderma.encode_metadata({"dicoderma": "1.0"}) == '{"dicoderma":"1.0"}'
    assert dicoderma.encode_metadata(LICHEN) == (
        '{"PatientID":"P001","PatientName":"DOE^JANE","PatientSex":"F","StudyDate":"20210301",'
        '"StudyDescription":"lichen planus","StudyTime":"093000","dicoderma":"1.0"}'
    )


def test_tag_and_read_back_with_pillow():
    from PIL import Image

    tagged = dicoderma.tag(fixture("camera_le.jpg"), LICHEN)
    assert dicoderma.read_tags(tagged) == LICHEN
    assert dicoderma.detect(dicoderma.read_user_comment(tagged))
    assert dicoderma.scan_data(tagged) == dicoderma.scan_data(fixture("camera_le.jpg"))

    image = Image.open(io.BytesIO(tagged))
    exif = image.getexif()
    assert exif[0x010F]  # Make survives
    raw = exif.get_ifd(0x8769)[0x9286]
    assert raw.startswith(b"ASCII\0\0\0")
    assert raw[8:].decode() == dicoderma.encode_metadata(LICHEN)
    assert exif.get_ifd(0x8825)  # GPS survives
    image.load()


def test_unicode_comment():
    assert dicoderma.read_user_comment(fixture("camera_be.jpg")) == "Café visit"


def test_errors_carry_codes():
    with pytest.raises(dicoderma.DicodermaError) as err:
        dicoderma.roundtrip_jpeg(fixture("not_a_jpeg.gif"))
    assert dicoderma.error_code(err.value) == "NotAJpeg"

    with pytest.raises(dicoderma.DicodermaError) as err:
        dicoderma.read_user_comment(fixture("bad_exif.jpg"))
    assert dicoderma.error_code(err.value) == "MalformedExif"

    with pytest.raises(dicoderma.DicodermaError) as err:
        dicoderma.decode_metadata('{"dicoderma":"1.0","PatientSex":"female"}')
    assert dicoderma.error_code(err.value) == "InvalidMetadata"
    assert dicoderma.error_issues(err.value)[0]["rule"] == "CS-codeset"

    with pytest.raises(dicoderma.DicodermaError) as err:
        dicoderma.decode_metadata('{"note":"hello"}')
    assert dicoderma.error_code(err.value) == "NotDicoderma"


def test_pseudonym_matches_hmac():
    for secret, patient in [("s", "P001"), ("clinic-secret", "MRN-004512"), ("k", "Zoë")]:
        expected = hmac.new(secret.encode(), patient.encode(), hashlib.sha256).hexdigest()[:16]
        assert dicoderma.pseudonym(secret, patient) == expected


def test_anonymize_defaults():
    out = dicoderma.anonymize({"dicoderma": "1.0", "PatientID": "P001", "PatientName": "DOE^JANE"}, secret="s")
    assert out == {"dicoderma": "1.0", "PatientID": "2259261fea0ce0c1", "Deidentified": True}
    assert dicoderma.anonymize(out, secret="s") == out
    with pytest.raises(dicoderma.DicodermaError):
        dicoderma.anonymize({"dicoderma": "1.0"})


def test_uids():
    assert dicoderma.make_uid("2.25", 1) == "2.25.1"
    assert dicoderma.make_uid("2.25", 2**128 - 1) == "2.25." + str(2**128 - 1)


def test_convert_read_by_pydicom():
    pydicom = pytest.importorskip("pydicom")
    from pydicom.encaps import generate_fragments

    source = dicoderma.tag(fixture("camera_le.jpg"), LICHEN)
    data, uid = dicoderma.convert(source, seed=3)
    assert data[:128] == bytes(128) and data[128:132] == b"DICM"

    ds = pydicom.dcmread(io.BytesIO(data))
    assert ds.SOPInstanceUID == uid
    assert ds.file_meta.TransferSyntaxUID == "1.2.840.10008.1.2.4.50"
    assert ds.PatientID == "P001"
    assert str(ds.PatientName) == "DOE^JANE"
    assert ds.StudyDescription == "lichen planus"
    assert ds.Modality == "OT"
    descriptor = dicoderma.image_descriptor(source)
    assert (ds.Rows, ds.Columns) == (descriptor["rows"], descriptor["columns"])
    items = list(generate_fragments(ds.PixelData))
    assert items[0] == b""
    fragment = items[1]
    if len(fragment) == len(source) + 1:
        assert fragment[-1] == 0
        fragment = fragment[:-1]
    assert fragment == source
    assert ds.pixel_array.shape[:2] == (ds.Rows, ds.Columns)


def test_convert_refuses_progressive():
    with pytest.raises(dicoderma.DicodermaError) as err:
        dicoderma.convert(fixture("progressive.jpg"))
    assert dicoderma.error_code(err.value) == "NotBaselineJpeg"


def test_search(tmp_path):
    (tmp_path / "a" / "b").mkdir(parents=True)
    (tmp_path / "a" / "one.jpg").write_bytes(dicoderma.tag(fixture("gray_8x8.jpg"), LICHEN))
    (tmp_path / "a" / "b" / "two.jpg").write_bytes(
        dicoderma.tag(fixture("color_2x1.jpg"), {"dicoderma": "1.0", "StudyDescription": "psoriasis"})
    )
    (tmp_path / "plain.jpg").write_bytes(fixture("camera_le.jpg"))

    hits = dicoderma.search(str(tmp_path), [("diagnosis", "contains", "LICHEN")])
    assert [Path(h["path"]).name for h in hits] == ["one.jpg"]
    assert len(dicoderma.search(str(tmp_path))) == 2
    with pytest.raises(ValueError):
        dicoderma.search(str(tmp_path), [("Colour", "equals", "red")])
