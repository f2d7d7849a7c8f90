"""Perspective rectification of quadrilateral image regions.

A text region detected in a photographed page is an arbitrary convex
quadrilateral.  Mapping it onto an axis-aligned raster takes a plane
homography: the 3x3 matrix sending the region's corners to the corners
of the destination rectangle.  This module estimates that matrix from
the four corner correspondences, applies it with bilinear resampling,
and reads and writes binary (P5) PGM images so results can be
inspected.

Conventions used throughout:

* image coordinates have x growing right and y growing down;
* pixel (i, j) of an array covers the unit square whose centre is
  (j + 0.5, i + 0.5);
* corners are ordered top-left, top-right, bottom-right, bottom-left.
"""

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateQuadError, FormatError, InputError

__all__ = [
    "Point",
    "Quad",
    "Homography",
    "GrayImage",
    "compute_homography",
    "rectify",
    "read_pgm",
    "write_pgm",
]


@dataclass(frozen=True)
class Point:
    """A 2-D point in image coordinates."""

    x: float
    y: float


@dataclass(frozen=True)
class Quad:
    """Four corners in top-left, top-right, bottom-right, bottom-left order.

    The corners must be in strictly convex position.  With y growing
    down, that winding makes every consecutive cross product positive,
    so the signed area is positive as well; collinear or self-crossing
    corner lists are rejected.
    """

    corners: tuple[Point, Point, Point, Point]

    def __post_init__(self):
        if len(self.corners) != 4:
            raise InputError("a quad needs exactly four corners")
        for p in self.corners:
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise InputError("quad corners must be finite")
        crosses = []
        for i in range(4):
            a = self.corners[i]
            b = self.corners[(i + 1) % 4]
            c = self.corners[(i + 2) % 4]
            crosses.append((b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x))
        if not all(z > 0.0 for z in crosses):
            raise DegenerateQuadError(
                "degenerate quad: corners must be strictly convex in "
                "top-left, top-right, bottom-right, bottom-left order"
            )

    @classmethod
    def from_points(cls, pts) -> "Quad":
        """Build a quad from any iterable of four (x, y) pairs."""
        corners = tuple(Point(float(x), float(y)) for x, y in pts)
        if len(corners) != 4:
            raise InputError("a quad needs exactly four corners")
        return cls(corners)

    @classmethod
    def from_rect(cls, left: float, top: float, right: float, bottom: float) -> "Quad":
        """Axis-aligned rectangle as a quad."""
        if not (left < right and top < bottom):
            raise InputError("rectangle must have positive width and height")
        return cls.from_points(
            [(left, top), (right, top), (right, bottom), (left, bottom)]
        )

    def area(self) -> float:
        """Signed area by the shoelace formula (positive for valid quads)."""
        s = 0.0
        for i in range(4):
            a = self.corners[i]
            b = self.corners[(i + 1) % 4]
            s += a.x * b.y - b.x * a.y
        return 0.5 * s


@dataclass(frozen=True)
class Homography:
    """A plane projective map, stored as a 3x3 matrix with h[2, 2] = 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise InputError("homography matrix must be 3x3")
        if not np.all(np.isfinite(m)):
            raise InputError("homography matrix must be finite")
        if m[2, 2] == 0.0:
            raise InputError("homography matrix must have h33 != 0")
        object.__setattr__(self, "matrix", m / m[2, 2])

    def apply(self, xs, ys):
        """Map point arrays through the homography.

        Parameters
        ----------
        xs, ys : array_like
            Coordinates of the points to map.

        Returns
        -------
        (ndarray, ndarray)
            Mapped x and y coordinates, same shape as the input.
        """
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        h = self.matrix
        w = h[2, 0] * xs + h[2, 1] * ys + h[2, 2]
        if np.any(w == 0.0):
            raise InputError("point maps to infinity under this homography")
        u = (h[0, 0] * xs + h[0, 1] * ys + h[0, 2]) / w
        v = (h[1, 0] * xs + h[1, 1] * ys + h[1, 2]) / w
        return u, v

    def apply_point(self, p: Point) -> Point:
        u, v = self.apply(p.x, p.y)
        return Point(float(u), float(v))

    def inverse(self) -> "Homography":
        try:
            inv = np.linalg.inv(self.matrix)
        except np.linalg.LinAlgError as exc:
            raise DegenerateQuadError("homography is not invertible") from exc
        return Homography(inv)


def compute_homography(src: Quad, width: int, height: int) -> Homography:
    """Estimate the homography sending ``src`` onto a width x height rectangle.

    The four corners of ``src`` are mapped, in order, to (0, 0),
    (width, 0), (width, height) and (0, height).  Four point pairs pin
    down the eight free parameters exactly, so the 8x8 linear system is
    solved directly (Gaussian elimination with partial pivoting via
    ``numpy.linalg.solve``); no least squares is involved.

    Parameters
    ----------
    src : Quad
        Source corners in top-left, top-right, bottom-right,
        bottom-left order.
    width, height : int
        Destination rectangle size in pixels; both must be >= 1.

    Returns
    -------
    Homography
        Matrix H with H(corner_k) = destination corner k.

    Raises
    ------
    InputError
        If width or height is < 1.
    DegenerateQuadError
        If the correspondence system is singular.
    """
    if int(width) != width or int(height) != height or width < 1 or height < 1:
        raise InputError("destination size must be integers >= 1")
    dst = [(0.0, 0.0), (float(width), 0.0), (float(width), float(height)), (0.0, float(height))]

    # Each correspondence (x, y) -> (u, v) gives two rows of the
    # standard direct linear system in the eight unknowns h11..h32.
    a = np.zeros((8, 8), dtype=np.float64)
    b = np.zeros(8, dtype=np.float64)
    for k, (corner, (u, v)) in enumerate(zip(src.corners, dst)):
        x, y = corner.x, corner.y
        a[2 * k] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]
        b[2 * k] = u
        a[2 * k + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]
        b[2 * k + 1] = v
    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateQuadError("degenerate quad: correspondence system is singular") from exc
    matrix = np.append(h, 1.0).reshape(3, 3)
    return Homography(matrix)


@dataclass(frozen=True)
class GrayImage:
    """A grayscale raster with float64 intensities in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise InputError("image must be a non-empty 2-D array")
        if not np.all(np.isfinite(px)):
            raise InputError("image intensities must be finite")
        if px.min() < -1e-9 or px.max() > 1.0 + 1e-9:
            raise InputError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", np.clip(px, 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def constant(cls, width: int, height: int, value: float = 1.0) -> "GrayImage":
        return cls(np.full((height, width), float(value)))


def _sample_bilinear(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear interpolation with pixel centres at half-integers.

    Points outside the image clamp to the nearest edge pixel, so the
    sampler is defined on the whole plane.
    """
    h, w = pixels.shape
    fx = xs - 0.5
    fy = ys - 0.5
    x0 = np.floor(fx)
    y0 = np.floor(fy)
    tx = fx - x0
    ty = fy - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    v00 = pixels[y0c, x0c]
    v01 = pixels[y0c, x1c]
    v10 = pixels[y1c, x0c]
    v11 = pixels[y1c, x1c]
    top = v00 * (1.0 - tx) + v01 * tx
    bot = v10 * (1.0 - tx) + v11 * tx
    return top * (1.0 - ty) + bot * ty


def rectify(image: GrayImage, src: Quad, width: int, height: int) -> GrayImage:
    """Resample the quad ``src`` of ``image`` onto a width x height raster.

    Every destination pixel centre (u + 0.5, v + 0.5) is pulled back
    through the inverse homography and the source image is sampled
    bilinearly at the resulting point; samples outside the source clamp
    to the nearest edge pixel.  For an axis-aligned, integer-coordinate
    source rectangle at the same scale this reduces to an exact pixel
    crop.

    Parameters
    ----------
    image : GrayImage
        Source raster.
    src : Quad
        Region to rectify.
    width, height : int
        Output size in pixels.

    Returns
    -------
    GrayImage
        The rectified patch.
    """
    hmat = compute_homography(src, width, height)
    hinv = hmat.inverse()
    us, vs = np.meshgrid(
        np.arange(width, dtype=np.float64) + 0.5,
        np.arange(height, dtype=np.float64) + 0.5,
    )
    sx, sy = hinv.apply(us, vs)
    return GrayImage(_sample_bilinear(image.pixels, sx, sy))


_PGM_HEADER = re.compile(rb"^P5\s")


def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated integer tokens, honouring
    ``#`` comments, and return them with the offset one byte past the
    final token's trailing whitespace character."""
    tokens: list[int] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] not in b"\r\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise FormatError("truncated PGM header")
        tok = data[start:i]
        if not tok.isdigit():
            raise FormatError(f"bad PGM header token {tok!r}")
        tokens.append(int(tok))
        if len(tokens) == count:
            if i >= n:
                raise FormatError("truncated PGM header")
            i += 1  # exactly one whitespace byte separates header and raster
    return tokens, i


def read_pgm(path) -> GrayImage:
    """Load a binary (P5) PGM file as a GrayImage.

    Maxval up to 255 is accepted; intensities are scaled to [0, 1].
    """
    data = Path(path).read_bytes()
    if not _PGM_HEADER.match(data):
        raise FormatError("not a binary PGM (P5) file")
    (width, height, maxval), offset = _read_pgm_tokens(data[2:], 3)
    offset += 2
    if width < 1 or height < 1:
        raise FormatError("PGM dimensions must be positive")
    if not 0 < maxval < 256:
        raise FormatError("only 8-bit PGM rasters are supported")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise FormatError("truncated PGM raster")
    px = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(px.astype(np.float64) / float(maxval))


def write_pgm(image: GrayImage, path) -> None:
    """Write a GrayImage as a binary (P5) PGM file with maxval 255."""
    px = np.rint(image.pixels * 255.0).astype(np.uint8)
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + px.tobytes())
