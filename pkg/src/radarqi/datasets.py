"""Target datasets: IDX ingestion, train/val/test splits, built-in rasters.

Real MNIST IDX files are used when available (``--mnist-dir``); otherwise a
procedurally generated digit corpus with the same 28x28 byte-raster format
stands in, so the full pipeline runs self-contained.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FormatError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

MNIST_IMAGE_FILES = ("train-images-idx3-ubyte", "train-images.idx3-ubyte")

# 5x7 digit glyphs; '#' marks a lit cell.
_DIGIT_GLYPHS = {
    0: (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    1: ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    2: (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    3: (".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."),
    4: ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    5: ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    6: (".###.", "#....", "####.", "#...#", "#...#", "#...#", ".###."),
    7: ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    8: (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    9: (".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."),
}


def _read_exact(f, n: int, offset: int, path) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise FormatError(
            f"{path}: truncated at byte offset {offset + len(data)}, "
            f"expected {n} more bytes"
        )
    return data


def _open_maybe_gzip(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx_images(path) -> np.ndarray:
    """Read an IDX image file into a (count, 28, 28) uint8 array.

    Raises
    ------
    FormatError
        On a wrong magic number, non-28x28 dimensions, or a truncated file;
        the message carries the byte offset of the problem.
    """
    with _open_maybe_gzip(path) as f:
        header = _read_exact(f, 16, 0, path)
        magic, count, rows, cols = struct.unpack(">iiii", header)
        if magic != IDX_IMAGE_MAGIC:
            raise FormatError(
                f"{path}: bad magic 0x{magic:08x} at byte offset 0, "
                f"expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        if count < 0:
            raise FormatError(f"{path}: negative image count {count} at byte offset 4")
        if (rows, cols) != (28, 28):
            raise FormatError(
                f"{path}: dimension mismatch {rows}x{cols} at byte offset 8, "
                "expected 28x28"
            )
        data = _read_exact(f, count * rows * cols, 16, path)
    return np.frombuffer(data, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    """Read an IDX label file into a (count,) uint8 array."""
    with _open_maybe_gzip(path) as f:
        header = _read_exact(f, 8, 0, path)
        magic, count = struct.unpack(">ii", header)
        if magic != IDX_LABEL_MAGIC:
            raise FormatError(
                f"{path}: bad magic 0x{magic:08x} at byte offset 0, "
                f"expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        if count < 0:
            raise FormatError(f"{path}: negative label count {count} at byte offset 4")
        data = _read_exact(f, count, 8, path)
    return np.frombuffer(data, dtype=np.uint8)


def write_idx_images(path, images: np.ndarray) -> None:
    """Write (count, 28, 28) uint8 rasters in IDX format."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", IDX_IMAGE_MAGIC, len(images), 28, 28))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    """Write (count,) uint8 labels in IDX format."""
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", IDX_LABEL_MAGIC, len(labels)))
        f.write(labels.tobytes())


def split_dataset(
    rasters: np.ndarray,
    seed: int,
    sizes: tuple[int, int, int] = (800, 200, 1000),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Randomly select disjoint train/val/test index sets of the given sizes.

    Deterministic for a fixed seed. Requires at least sum(sizes) rasters.
    """
    n_train, n_val, n_test = sizes
    total = n_train + n_val + n_test
    if len(rasters) < total:
        raise ValueError(
            f"need at least {total} rasters for split sizes {sizes}, "
            f"got {len(rasters)}"
        )
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5711]))
    perm = rng.permutation(len(rasters))
    return (
        perm[:n_train],
        perm[n_train : n_train + n_val],
        perm[n_train + n_val : total],
    )


def _glyph_array(digit: int) -> np.ndarray:
    rows = _DIGIT_GLYPHS[digit]
    return np.array([[c == "#" for c in row] for row in rows], dtype=np.float64)


def synthetic_digit_rasters(count: int, seed: int) -> np.ndarray:
    """Generate an MNIST-like corpus of 28x28 uint8 digit rasters.

    Each raster is a 5x7 glyph scaled x3, jittered in position, lightly
    blurred, and amplitude-scaled. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xD161]))
    out = np.zeros((count, 28, 28), dtype=np.uint8)
    for i in range(count):
        glyph = _glyph_array(int(rng.integers(0, 10)))
        big = np.kron(glyph, np.ones((3, 3)))  # 21 x 15
        canvas = np.zeros((28, 28))
        r0 = int(rng.integers(2, 6))
        c0 = int(rng.integers(2, 12))
        canvas[r0 : r0 + 21, c0 : c0 + 15] = big
        canvas = ndimage.gaussian_filter(canvas, sigma=float(rng.uniform(0.5, 0.9)))
        peak = canvas.max()
        if peak > 0:
            canvas *= float(rng.uniform(0.75, 1.0)) / peak
        canvas[canvas < 0.06] = 0.0  # hard-zero background, like real scans
        out[i] = np.clip(np.floor(canvas * 255.0 + 0.5), 0, 255).astype(np.uint8)
    return out


def load_digit_rasters(mnist_dir, minimum: int, seed: int) -> np.ndarray:
    """Load the digit corpus from IDX files, or synthesize one.

    Looks for a training-image IDX file (optionally gzipped) under
    ``mnist_dir``; when ``mnist_dir`` is falsy or no file is found, returns
    ``synthetic_digit_rasters(minimum, seed)``.
    """
    if mnist_dir:
        base = Path(mnist_dir)
        for name in MNIST_IMAGE_FILES:
            for candidate in (base / name, base / (name + ".gz")):
                if candidate.exists():
                    return read_idx_images(candidate)
        raise FormatError(
            f"no MNIST training-image IDX file found under {base} "
            f"(looked for {', '.join(MNIST_IMAGE_FILES)}; optionally .gz)"
        )
    return synthetic_digit_rasters(minimum, seed)


# ---------------------------------------------------------------------------
# Built-in evaluation targets (shapes and letters unseen during training)
# ---------------------------------------------------------------------------

_LETTER_GLYPHS = {
    "T": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."),
    "L": ("#....", "#....", "#....", "#....", "#....", "#....", "#####"),
    "E": ("#####", "#....", "#....", "####.", "#....", "#....", "#####"),
    "H": ("#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
}


def _letter_raster(letter: str) -> np.ndarray:
    rows = _LETTER_GLYPHS[letter]
    glyph = np.array([[c == "#" for c in row] for row in rows], dtype=np.float64)
    big = np.kron(glyph, np.ones((3, 3)))  # 21 x 15
    canvas = np.zeros((28, 28))
    canvas[3:24, 6:21] = big
    return (canvas * 255).astype(np.uint8)


def shape_rasters() -> dict[str, np.ndarray]:
    """Built-in 28x28 test targets: solid rectangle, cross, ring, letters."""
    yy, xx = np.mgrid[0:28, 0:28]

    rectangle = np.zeros((28, 28))
    rectangle[9:19, 6:22] = 1.0

    cross = np.zeros((28, 28))
    cross[12:16, 5:23] = 1.0
    cross[5:23, 12:16] = 1.0

    r = np.sqrt((yy - 13.5) ** 2 + (xx - 13.5) ** 2)
    ring = ((r >= 6.0) & (r <= 9.0)).astype(np.float64)

    shapes = {
        "rectangle": rectangle,
        "cross": cross,
        "ring": ring,
    }
    out = {name: (arr * 255).astype(np.uint8) for name, arr in shapes.items()}
    for letter in _LETTER_GLYPHS:
        out[f"letter_{letter}"] = _letter_raster(letter)
    return out
