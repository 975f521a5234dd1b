"""Sparse test scene synthesis and glyph dataset handling.

Scene families: random line art (quadratic strokes plus ellipse outlines),
composites of placed-and-scaled glyph rasters, and a vignetted Siemens star
resolution chart. Glyph sets load from big-endian IDX archives; a seeded
synthetic glyph generator stands in when no archive is available.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadParam, SparsityUnreachable
from .formats import read_idx_u8_3d, write_idx_u8_3d
from .model import SceneImage


@dataclass(frozen=True)
class GlyphSet:
    """Uniformly sized glyph rasters with values in [0, 1]."""

    glyphs: np.ndarray  # (count, height, width) float64

    def __post_init__(self):
        g = np.asarray(self.glyphs, dtype=np.float64)
        if g.ndim != 3 or g.shape[0] < 1:
            raise BadParam("glyphs must be a non-empty (count, h, w) array")
        g.flags.writeable = False
        object.__setattr__(self, "glyphs", g)

    @property
    def count(self) -> int:
        return self.glyphs.shape[0]


def load_idx_glyphs(path: str | Path) -> GlyphSet:
    """Read an IDX u8 image archive (MNIST layout); values scaled to [0, 1]."""
    return GlyphSet(glyphs=read_idx_u8_3d(path) / 255.0)


def save_idx_glyphs(path: str | Path, glyphs: GlyphSet) -> None:
    write_idx_u8_3d(path, np.floor(glyphs.glyphs * 255.0 + 0.5).astype(np.uint8))


@dataclass(frozen=True)
class SceneSpec:
    kind: str  # "lineart" | "glyphs" | "siemens"
    seed: int = 0
    sparsity_max: float = 0.05
    glyph_count: tuple = (3, 10)
    glyph_scale: tuple = (0.5, 2.0)
    spokes: int = 32
    vignette: float = 2.0

    def __post_init__(self):
        if self.kind not in ("lineart", "glyphs", "siemens"):
            raise BadParam(f"unknown scene kind {self.kind!r}")
        if not (0.0 < self.sparsity_max <= 0.5):
            raise BadParam("sparsity_max must be in (0, 0.5]")


def _stamp(canvas: np.ndarray, ys: np.ndarray, xs: np.ndarray, width: int):
    """Mark square brushes of the given width at integer points, clipped."""
    h, w = canvas.shape
    half_lo = (width - 1) // 2
    half_hi = width // 2
    for dy in range(-half_lo, half_hi + 1):
        for dx in range(-half_lo, half_hi + 1):
            yy = ys + dy
            xx = xs + dx
            keep = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            canvas[yy[keep], xx[keep]] = 1.0


def _draw_stroke(canvas: np.ndarray, rng: np.random.Generator):
    h, w = canvas.shape
    scale = min(w, h)
    p0 = rng.uniform([0, 0], [w, h])
    angle = rng.uniform(0, 2 * np.pi)
    length = rng.uniform(0.1, 0.4) * scale
    p2 = p0 + length * np.array([np.cos(angle), np.sin(angle)])
    p1 = (p0 + p2) / 2 + rng.normal(0.0, length / 4.0, size=2)
    pen = int(rng.choice([1, 2, 3], p=[0.6, 0.3, 0.1]))
    t = np.linspace(0.0, 1.0, 2 * int(np.ceil(length)) + 3)
    pts = (
        np.outer((1 - t) ** 2, p0) + np.outer(2 * (1 - t) * t, p1) + np.outer(t**2, p2)
    )
    xs = np.rint(pts[:, 0]).astype(int)
    ys = np.rint(pts[:, 1]).astype(int)
    _stamp(canvas, ys, xs, pen)


def _draw_ellipse(canvas: np.ndarray, rng: np.random.Generator):
    h, w = canvas.shape
    scale = min(w, h)
    cx, cy = rng.uniform([0, 0], [w, h])
    a = rng.uniform(0.03, 0.12) * scale
    b = rng.uniform(0.03, 0.12) * scale
    phi = rng.uniform(0, np.pi)
    t = np.linspace(0.0, 2 * np.pi, 2 * int(np.ceil(2 * np.pi * max(a, b))) + 3)
    ex = a * np.cos(t)
    ey = b * np.sin(t)
    xs = np.rint(cx + ex * np.cos(phi) - ey * np.sin(phi)).astype(int)
    ys = np.rint(cy + ex * np.sin(phi) + ey * np.cos(phi)).astype(int)
    _stamp(canvas, ys, xs, 1)


def gen_lineart(width: int, height: int, spec: SceneSpec) -> SceneImage:
    """Binary line-art scene under the sparsity budget; deterministic by seed."""
    if spec.kind != "lineart":
        raise BadParam("spec.kind must be 'lineart'")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    budget = spec.sparsity_max * width * height
    for _ in range(100):
        canvas = np.zeros((height, width))
        for _ in range(int(rng.integers(3, 13))):
            _draw_stroke(canvas, rng)
        for _ in range(int(rng.integers(0, 4))):
            _draw_ellipse(canvas, rng)
        support = int(np.count_nonzero(canvas))
        if 0 < support <= budget:
            return SceneImage(width=width, height=height, data=canvas)
    raise SparsityUnreachable(
        f"no draw met support <= {spec.sparsity_max} at {width}x{height} in 100 tries"
    )


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = img.shape
    if (out_h, out_w) == (in_h, in_w):
        return img.copy()
    ys = np.linspace(0, in_h - 1, out_h)
    xs = np.linspace(0, in_w - 1, out_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bot = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def compose_glyph_scene(
    width: int, height: int, glyphs: GlyphSet, spec: SceneSpec
) -> SceneImage:
    """Max-composite of randomly placed and scaled glyphs; deterministic by seed."""
    if spec.kind != "glyphs":
        raise BadParam("spec.kind must be 'glyphs'")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    lo, hi = spec.glyph_count
    k = int(rng.integers(lo, hi + 1))
    canvas = np.zeros((height, width))
    for _ in range(k):
        glyph = glyphs.glyphs[int(rng.integers(0, glyphs.count))]
        s = rng.uniform(*spec.glyph_scale)
        gh = max(1, int(round(glyph.shape[0] * s)))
        gw = max(1, int(round(glyph.shape[1] * s)))
        scaled = _bilinear_resize(glyph, gh, gw)
        y0 = int(rng.integers(0, max(1, height - gh + 1)))
        x0 = int(rng.integers(0, max(1, width - gw + 1)))
        vh = min(gh, height - y0)
        vw = min(gw, width - x0)
        region = canvas[y0 : y0 + vh, x0 : x0 + vw]
        np.maximum(region, scaled[:vh, :vw], out=region)
    return SceneImage(width=width, height=height, data=canvas)


def siemens_star(width: int, height: int, spokes: int, vignette: float) -> SceneImage:
    """Radial spoke chart attenuated by a Gaussian vignette; no randomness."""
    if spokes < 2 or spokes % 2 != 0:
        raise BadParam(f"spokes must be even and >= 2, got {spokes}")
    if vignette < 0:
        raise BadParam(f"vignette must be >= 0, got {vignette}")
    ix = np.arange(width)[None, :] - width / 2.0
    iy = np.arange(height)[:, None] - height / 2.0
    theta = np.mod(np.arctan2(iy, ix), 2.0 * np.pi)
    sector = np.minimum(
        np.floor(theta * spokes / (2.0 * np.pi)).astype(int), spokes - 1
    )
    radius = min(width, height) / 2.0
    rho2 = ix**2 + iy**2
    value = (sector % 2 == 0) * np.exp(-(rho2 / radius**2) * vignette)
    return SceneImage(width=width, height=height, data=value)


def synthetic_glyph_set(count: int, seed: int, size: int = 28) -> GlyphSet:
    """Seeded stand-in glyphs (short strokes on a small raster) for runs
    without an external IDX archive."""
    if count < 1:
        raise BadParam("count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    glyphs = np.zeros((count, size, size))
    for i in range(count):
        for _ in range(int(rng.integers(1, 4))):
            _draw_stroke(glyphs[i], rng)
        for _ in range(int(rng.integers(0, 2))):
            _draw_ellipse(glyphs[i], rng)
    return GlyphSet(glyphs=glyphs)


def generate_scene(
    width: int, height: int, spec: SceneSpec, glyphs: GlyphSet | None = None
) -> SceneImage:
    """Dispatch on spec.kind; glyph scenes need a glyph set."""
    if spec.kind == "lineart":
        return gen_lineart(width, height, spec)
    if spec.kind == "glyphs":
        if glyphs is None:
            raise BadParam("glyph scenes require a glyph set")
        return compose_glyph_scene(width, height, glyphs, spec)
    return siemens_star(width, height, spec.spokes, spec.vignette)
