"""Clinical tags in JPEG EXIF UserComment, with DICOM Secondary Capture conversion."""

from ._core import (
    DicodermaError,
    __version__,
    anonymize,
    convert,
    decode_metadata,
    detect,
    encode_metadata,
    image_descriptor,
    make_uid,
    pseudonym,
    read_tags,
    read_user_comment,
    roundtrip_jpeg,
    scan_data,
    search,
    tag,
    write_user_comment,
)


def error_code(exc: DicodermaError) -> str:
    """Stable error code carried by a DicodermaError ("NotAJpeg", ...)."""
    return exc.args[0]


def error_issues(exc: DicodermaError) -> list:
    """Validation issues for InvalidMetadata errors, else an empty list."""
    return exc.args[2] if len(exc.args) > 2 else []


__all__ = [
    "DicodermaError",
    "anonymize",
    "convert",
    "decode_metadata",
    "detect",
    "encode_metadata",
    "error_code",
    "error_issues",
    "image_descriptor",
    "make_uid",
    "pseudonym",
    "read_tags",
    "read_user_comment",
    "roundtrip_jpeg",
    "scan_data",
    "search",
    "tag",
    "write_user_comment",
]
