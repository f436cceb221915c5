#!/usr/bin/env python3
"""Regenerates tests/data/malformed and tests/data/nifti.

Every malformed file is a valid 4x3x2 uint8 image with one defect.
expected.json maps each file to the error kind the reader must report.
"""
import gzip
import json
import os
import struct

HERE = os.path.dirname(os.path.abspath(__file__))


def header(dims=(3, 4, 3, 2, 1, 1, 1, 1), datatype=2, bitpix=8, pixdim=(1, 1.0, 1.5, 2.0, 1, 1, 1, 1),
           vox_offset=352.0, magic=b"n+1\0", sizeof_hdr=348, endian="<", slope=1.0, inter=0.0):
    h = bytearray(348)
    struct.pack_into(endian + "i", h, 0, sizeof_hdr)
    struct.pack_into(endian + "8h", h, 40, *dims)
    struct.pack_into(endian + "h", h, 70, datatype)
    struct.pack_into(endian + "h", h, 72, bitpix)
    struct.pack_into(endian + "8f", h, 76, *pixdim)
    struct.pack_into(endian + "f", h, 108, vox_offset)
    struct.pack_into(endian + "f", h, 112, slope)
    struct.pack_into(endian + "f", h, 116, inter)
    h[123] = 2
    h[344:348] = magic
    return bytes(h)


def payload(n=24, fmt="B", endian="<"):
    return struct.pack(endian + str(n) + fmt, *[(i * 7) % 5 for i in range(n)])


def image(**kw):
    endian = kw.get("endian", "<")
    return header(**kw) + b"\0\0\0\0" + payload(endian=endian)


def write(path, data):
    with open(path, "wb") as f:
        f.write(data)


def main():
    bad = os.path.join(HERE, "malformed")
    good = os.path.join(HERE, "nifti")
    os.makedirs(bad, exist_ok=True)
    os.makedirs(good, exist_ok=True)

    cases = {
        "truncated_header.nii": (image()[:200], "truncated header"),
        "bad_sizeof_hdr.nii": (image(sizeof_hdr=100), "bad sizeof_hdr"),
        "nifti2.nii": (image(sizeof_hdr=540), "NIfTI-2 unsupported"),
        "bad_magic.nii": (image(magic=b"abc\0"), "bad magic"),
        "rgb_datatype.nii": (image(datatype=128, bitpix=24), "unsupported datatype"),
        "bitpix_mismatch.nii": (image(datatype=16, bitpix=8), "bitpix mismatch"),
        "zero_rank.nii": (image(dims=(0, 4, 3, 2, 1, 1, 1, 1)), "bad dimensions"),
        "negative_dim.nii": (image(dims=(3, 4, -3, 2, 1, 1, 1, 1)), "bad dimensions"),
        "five_dims.nii": (image(dims=(5, 4, 3, 2, 1, 2, 1, 1)), "too many dimensions"),
        "zero_pixdim.nii": (image(pixdim=(1, 1.0, 0.0, 2.0, 1, 1, 1, 1)), "bad pixdim"),
        "small_vox_offset.nii": (image(vox_offset=100.0), "bad vox_offset"),
        "truncated_payload.nii": (image()[:360], "truncated payload"),
        "bad_extension.img": (image(), "bad extension"),
    }
    expected = {}
    for name, (data, kind) in cases.items():
        write(os.path.join(bad, name), data)
        expected[name] = kind
    with open(os.path.join(bad, "expected.json"), "w") as f:
        json.dump(expected, f, indent=2, sort_keys=True)
        f.write("\n")

    # Valid images: little-endian, its gzip twin, and a big-endian copy.
    le = image()
    write(os.path.join(good, "small_le.nii"), le)
    with gzip.GzipFile(os.path.join(good, "small_le.nii.gz"), "wb", mtime=0) as f:
        f.write(le)
    be = header(endian=">") + b"\0\0\0\0" + payload(endian=">")
    write(os.path.join(good, "small_be.nii"), be)
    # int16 data with slope/intercept: stored v, read back as 0.5 v + 1.
    scaled = header(datatype=4, bitpix=16, slope=0.5, inter=1.0) + b"\0\0\0\0" + payload(fmt="h")
    write(os.path.join(good, "scaled_i16.nii"), scaled)
    # Two-file pair: header in .hdr-style "ni1" file named .nii, data in .img.
    write(os.path.join(good, "pair.nii"), header(magic=b"ni1\0", vox_offset=0.0))
    write(os.path.join(good, "pair.img"), payload())


if __name__ == "__main__":
    main()
