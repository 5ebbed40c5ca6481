"""8-bit binary PPM (P6) image I/O.

Images cross this boundary as float arrays of shape (3, H, W) in [0, 1];
values are clipped and rounded to 8 bits on write.
"""

import numpy as np

from .errors import ContainerError


def encode_ppm(image):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ContainerError(f"PPM writer wants (3, H, W), got {img.shape}")
    _, h, w = img.shape
    pixels = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + pixels.transpose(1, 2, 0).tobytes()


def decode_ppm(data):
    if not data.startswith(b"P6"):
        raise ContainerError("not a binary PPM (P6) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":  # comment line
            end = data.find(b"\n", pos)
            pos = end + 1 if end >= 0 else len(data)
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ContainerError("truncated PPM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError:
        raise ContainerError(f"bad PPM header fields {fields!r}") from None
    if maxval != 255:
        raise ContainerError(f"unsupported PPM max value {maxval}")
    need = w * h * 3
    raw = data[pos:pos + need]
    if len(raw) != need:
        raise ContainerError(f"PPM pixel data truncated: {len(raw)}/{need} bytes")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3)
    return arr.transpose(2, 0, 1).astype(np.float64) / 255.0


def write_ppm(path, image):
    with open(path, "wb") as fh:
        fh.write(encode_ppm(image))


def read_ppm(path):
    with open(path, "rb") as fh:
        return decode_ppm(fh.read())
