"""Regenerates the JPEG fixtures used by the C++ and Python test suites.

Pixel streams come from Pillow's encoder (libjpeg). EXIF blocks are assembled
here by hand so the fixtures do not depend on the code under test.
"""
import io
import struct
from pathlib import Path

from PIL import Image

HERE = Path(__file__).resolve().parent

TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 7: 1, 9: 4, 10: 8}


def encode_jpeg(mode, size, color, **kw):
    img = Image.new(mode, size, color)
    if size[0] * size[1] > 4:
        px = img.load()
        for y in range(size[1]):
            for x in range(size[0]):
                if mode == "L":
                    px[x, y] = (x * 37 + y * 11) % 256
                else:
                    px[x, y] = ((x * 37) % 256, (y * 53) % 256, ((x + y) * 19) % 256)
    buf = io.BytesIO()
    img.save(buf, "JPEG", quality=90, **kw)
    return buf.getvalue()


def entry(bo, tag, ftype, values):
    """values: bytes for BYTE/ASCII/UNDEFINED, tuple of ints otherwise."""
    if isinstance(values, bytes):
        raw, count = values, len(values)
    elif ftype == 3:
        raw, count = struct.pack(bo + "%dH" % len(values), *values), len(values)
    elif ftype == 4:
        raw, count = struct.pack(bo + "%dI" % len(values), *values), len(values)
    elif ftype in (5, 10):
        fmt = "I" if ftype == 5 else "i"
        raw = struct.pack(bo + "%d%s" % (len(values), fmt), *values)
        count = len(values) // 2
    else:
        raise ValueError(ftype)
    return [tag, ftype, count, raw]


def build_tiff(bo, ifds, thumbnail=None):
    """ifds: dict name -> entry list; names ifd0, exif, gps, ifd1."""
    order = [n for n in ("ifd0", "exif", "gps", "ifd1") if n in ifds]
    pointer_tags = {"exif": ("ifd0", 0x8769), "gps": ("ifd0", 0x8825)}
    for name in order:
        if name in pointer_tags:
            parent, tag = pointer_tags[name]
            ifds[parent].append([tag, 4, 1, b"\0\0\0\0"])
    if thumbnail is not None:
        ifds["ifd1"].append([0x0201, 4, 1, b"\0\0\0\0"])
        ifds["ifd1"].append([0x0202, 4, 1, struct.pack(bo + "I", len(thumbnail))])
    for name in order:
        ifds[name].sort(key=lambda e: e[0])

    def block_size(entries):
        data = sum((len(e[3]) + 1) & ~1 for e in entries if len(e[3]) > 4)
        return 2 + 12 * len(entries) + 4, data

    offsets, cursor = {}, 8
    for name in order:
        table, data = block_size(ifds[name])
        offsets[name] = cursor
        cursor += table + data
    thumb_offset = cursor

    def set_long(name, tag, value):
        for e in ifds[name]:
            if e[0] == tag:
                e[3] = struct.pack(bo + "I", value)

    for name in order:
        if name in pointer_tags:
            set_long(pointer_tags[name][0], pointer_tags[name][1], offsets[name])
    if thumbnail is not None:
        set_long("ifd1", 0x0201, thumb_offset)

    out = bytearray(b"II*\0" if bo == "<" else b"MM\0*")
    out += struct.pack(bo + "I", 8)
    for name in order:
        entries = ifds[name]
        table, _ = block_size(entries)
        data_at = offsets[name] + table
        table_bytes = bytearray(struct.pack(bo + "H", len(entries)))
        data_bytes = bytearray()
        for tag, ftype, count, raw in entries:
            table_bytes += struct.pack(bo + "HHI", tag, ftype, count)
            if len(raw) <= 4:
                table_bytes += raw + b"\0" * (4 - len(raw))
            else:
                table_bytes += struct.pack(bo + "I", data_at + len(data_bytes))
                data_bytes += raw + (b"\0" if len(raw) % 2 else b"")
        nxt = offsets["ifd1"] if (name == "ifd0" and "ifd1" in ifds) else 0
        table_bytes += struct.pack(bo + "I", nxt)
        assert len(out) == offsets[name]
        out += table_bytes + data_bytes
    if thumbnail is not None:
        assert len(out) == thumb_offset
        out += thumbnail
    return bytes(out)


def insert_app1(jpeg, payload):
    """Inserts an APP1 after SOI and after a leading JFIF APP0 if present."""
    assert jpeg[:2] == b"\xff\xd8"
    pos = 2
    if jpeg[2:4] == b"\xff\xe0":
        pos = 4 + struct.unpack(">H", jpeg[4:6])[0]
    seg = b"\xff\xe1" + struct.pack(">H", len(payload) + 2) + payload
    return jpeg[:pos] + seg + jpeg[pos:]


def camera_ifds(bo, comment):
    ifd0 = [
        entry(bo, 0x010F, 2, b"Canon\0"),
        entry(bo, 0x0110, 2, b"Canon EOS 80D\0"),
        entry(bo, 0x0112, 3, (1,)),
        entry(bo, 0x011A, 5, (72, 1)),
        entry(bo, 0x011B, 5, (72, 1)),
        entry(bo, 0x0128, 3, (2,)),
        entry(bo, 0x0132, 2, b"2021:03:01 09:30:00\0"),
    ]
    exif = [
        entry(bo, 0x829A, 5, (1, 125)),
        entry(bo, 0x829D, 5, (56, 10)),
        entry(bo, 0x8827, 3, (400,)),
        entry(bo, 0x9000, 7, b"0231"),
        entry(bo, 0x9003, 2, b"2021:03:01 09:30:00\0"),
        entry(bo, 0x9004, 2, b"2021:03:01 09:30:00\0"),
        entry(bo, 0x9201, 10, (-7, 1)),
        entry(bo, 0x927C, 7, bytes(range(40)) + b"MAKERNOTE"),
        entry(bo, 0xA001, 3, (1,)),
    ]
    if comment is not None:
        exif.append(entry(bo, 0x9286, 7, comment))
    gps = [
        entry(bo, 0x0000, 1, b"\x02\x03\x00\x00"),
        entry(bo, 0x0001, 2, b"N\0"),
        entry(bo, 0x0002, 5, (51, 1, 30, 1, 1234, 100)),
        entry(bo, 0x0003, 2, b"W\0"),
        entry(bo, 0x0004, 5, (0, 1, 7, 1, 4000, 100)),
    ]
    return {"ifd0": ifd0, "exif": exif, "gps": gps}


def sof_fields(jpeg):
    pos = 2
    while pos < len(jpeg):
        marker = jpeg[pos + 1]
        length = struct.unpack(">H", jpeg[pos + 2:pos + 4])[0]
        if 0xC0 <= marker <= 0xCF and marker not in (0xC4, 0xC8, 0xCC):
            p, rows, cols, comps = struct.unpack(">BHHB", jpeg[pos + 4:pos + 10])
            return marker, p, rows, cols, comps
        pos += 2 + length
    raise ValueError("no SOF")


def main():
    color = encode_jpeg("RGB", (2, 1), (200, 30, 60))
    # Hex inspection of the frame header: SOF0, 8-bit, 1 row, 2 columns, 3 components.
    assert sof_fields(color) == (0xC0, 8, 1, 2, 3)
    (HERE / "color_2x1.jpg").write_bytes(color)

    gray = encode_jpeg("L", (8, 8), 128)
    assert sof_fields(gray) == (0xC0, 8, 8, 8, 1)
    (HERE / "gray_8x8.jpg").write_bytes(gray)

    prog = encode_jpeg("RGB", (16, 16), (10, 20, 30), progressive=True)
    assert sof_fields(prog)[0] == 0xC2
    (HERE / "progressive.jpg").write_bytes(prog)

    base = encode_jpeg("RGB", (32, 24), (0, 0, 0))
    thumb = encode_jpeg("RGB", (8, 6), (0, 0, 0))

    ifds = camera_ifds("<", b"ASCII\0\0\0Shot on holiday")
    ifds["ifd1"] = [entry("<", 0x0103, 3, (6,)), entry("<", 0x011A, 5, (72, 1)),
                    entry("<", 0x011B, 5, (72, 1)), entry("<", 0x0128, 3, (2,))]
    tiff = build_tiff("<", ifds, thumbnail=thumb)
    (HERE / "camera_le.jpg").write_bytes(insert_app1(base, b"Exif\0\0" + tiff))

    be_comment = b"UNICODE\0" + "Café visit".encode("utf-16-be")
    tiff = build_tiff(">", camera_ifds(">", be_comment))
    (HERE / "camera_be.jpg").write_bytes(insert_app1(gray, b"Exif\0\0" + tiff))

    tiff = build_tiff("<", {"ifd0": [entry("<", 0x0131, 2, b"LegacyTool 1.0\0")],
                            "exif": [entry("<", 0x9286, 7, b"ASCII\0\0\0old")]})
    (HERE / "old_comment.jpg").write_bytes(insert_app1(color, b"Exif\0\0" + tiff))

    garbage = b"Exif\0\0" + b"XX\0\0garbage-tiff-header"
    (HERE / "bad_exif.jpg").write_bytes(insert_app1(color, garbage))

    (HERE / "not_a_jpeg.gif").write_bytes(b"GIF89a\x01\x00\x01\x00\x00\x00\x00;")


if __name__ == "__main__":
    main()
