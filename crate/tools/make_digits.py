#!/usr/bin/env python3
"""Generate a deterministic MNIST-style digit dataset in IDX format.

Digits 0-9 are rendered with a handful of TTF fonts and randomized
affine jitter (shift, rotation, scale, shear) plus mild blur, then
downsampled to 28x28 grayscale. Output files use the standard IDX
magics (2051 images / 2049 labels), big-endian.

Usage: python3 tools/make_digits.py OUTDIR [train_count] [test_count]
"""
import os
import struct
import sys

import numpy as np
from PIL import Image, ImageDraw, ImageFilter, ImageFont

FONT_DIR = None
try:
    import matplotlib

    FONT_DIR = os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data/fonts/ttf")
except ImportError:
    pass

FONTS = [
    "DejaVuSans.ttf",
    "DejaVuSans-Bold.ttf",
    "DejaVuSerif.ttf",
    "DejaVuSerif-Bold.ttf",
    "DejaVuSansMono.ttf",
    "DejaVuSansMono-Bold.ttf",
]

HI = 112  # render at 4x then downsample
OUT = 28


def render_digit(digit, font, rng):
    img = Image.new("L", (HI, HI), 0)
    draw = ImageDraw.Draw(img)
    text = str(digit)
    bbox = draw.textbbox((0, 0), text, font=font)
    w, h = bbox[2] - bbox[0], bbox[3] - bbox[1]
    cx = (HI - w) / 2 - bbox[0]
    cy = (HI - h) / 2 - bbox[1]
    draw.text((cx, cy), text, fill=255, font=font)

    angle = rng.uniform(-14, 14)
    shear = rng.uniform(-0.18, 0.18)
    scale = rng.uniform(0.82, 1.12)
    tx = rng.uniform(-7, 7)
    ty = rng.uniform(-7, 7)

    a = np.cos(np.radians(angle)) * scale
    b = (np.sin(np.radians(angle)) + shear) * scale
    c = -np.sin(np.radians(angle)) * scale
    d = np.cos(np.radians(angle)) * scale
    # affine about the image center, then translate
    ox, oy = HI / 2, HI / 2
    img = img.transform(
        (HI, HI),
        Image.AFFINE,
        (a, b, ox - a * ox - b * oy + tx, c, d, oy - c * ox - d * oy + ty),
        resample=Image.BILINEAR,
    )
    img = img.filter(ImageFilter.GaussianBlur(radius=rng.uniform(0.6, 1.6)))
    img = img.resize((OUT, OUT), Image.LANCZOS)
    arr = np.asarray(img, dtype=np.float64)
    if arr.max() > 0:
        arr = arr * (255.0 / arr.max())
    # sprinkle of pixel noise so binarized images are not perfectly clean
    noise = rng.normal(0, 10, size=arr.shape)
    arr = np.clip(arr + noise, 0, 255)
    return arr.astype(np.uint8)


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), OUT, OUT))
        for img in images:
            f.write(img.tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(int(l) for l in labels))


def make_split(count, seed):
    rng = np.random.default_rng(seed)
    fonts = [ImageFont.truetype(os.path.join(FONT_DIR, name), 72) for name in FONTS]
    images, labels = [], []
    for i in range(count):
        digit = int(rng.integers(0, 10))
        font = fonts[int(rng.integers(0, len(fonts)))]
        images.append(render_digit(digit, font, rng))
        labels.append(digit)
    return images, labels


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else "data"
    train_n = int(sys.argv[2]) if len(sys.argv) > 2 else 12000
    test_n = int(sys.argv[3]) if len(sys.argv) > 3 else 2500
    os.makedirs(outdir, exist_ok=True)

    tr_imgs, tr_labels = make_split(train_n, seed=20260823)
    te_imgs, te_labels = make_split(test_n, seed=20260824)

    write_idx_images(os.path.join(outdir, "train-images-idx3-ubyte"), tr_imgs)
    write_idx_labels(os.path.join(outdir, "train-labels-idx1-ubyte"), tr_labels)
    write_idx_images(os.path.join(outdir, "t10k-images-idx3-ubyte"), te_imgs)
    write_idx_labels(os.path.join(outdir, "t10k-labels-idx1-ubyte"), te_labels)
    print(f"wrote {train_n} train / {test_n} test images to {outdir}")


if __name__ == "__main__":
    main()
