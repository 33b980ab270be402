"""Heatmap rasters: one pixel block per cell, north up, with an embedded legend."""

import numpy as np
from matplotlib import colormaps
from PIL import Image, ImageDraw, ImageFont

NODATA_RGB = (160, 160, 160)
MARKER_RGB = (230, 20, 20)
BACKGROUND = (255, 255, 255)
LEGEND_HEIGHT = 28


def palette_lut(name, n=256):
    cmap = colormaps[name]
    rgba = cmap(np.linspace(0.0, 1.0, n))
    return np.round(rgba[:, :3] * 255.0).astype(np.uint8)


def colorize(values, vmin, vmax, palette="viridis"):
    """Map values linearly onto the palette; NaN becomes the no-data colour."""
    if not vmax > vmin:
        raise ValueError("vmax must exceed vmin")
    lut = palette_lut(palette)
    v = np.asarray(values, dtype=np.float64)
    nodata = np.isnan(v)
    with np.errstate(invalid="ignore"):
        x = (np.where(nodata, vmin, v) - vmin) / (vmax - vmin)
    idx = np.clip(np.round(np.nan_to_num(x, nan=0.0, posinf=1.0, neginf=0.0) * (len(lut) - 1)),
                  0, len(lut) - 1).astype(np.int64)
    rgb = lut[idx]
    rgb[nodata] = NODATA_RGB
    return rgb


def render_heatmap(values, grid, palette="viridis", markers=(), vmin=None, vmax=None,
                   pixels_per_cell=4, legend=True, label=""):
    """Render ``values`` (ny, nx) over ``grid`` (origin/spacing/nx/ny) as an RGB image.

    ``markers`` are (x, y) positions in metres drawn as red crosses.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (grid.ny, grid.nx):
        raise ValueError(f"field shape {v.shape} does not match grid ({grid.ny}, {grid.nx})")
    finite = v[np.isfinite(v)]
    if vmin is None:
        vmin = float(finite.min()) if finite.size else 0.0
    if vmax is None:
        vmax = float(finite.max()) if finite.size else 1.0
    if not vmax > vmin:
        vmax = vmin + 1.0
    ppc = int(pixels_per_cell)
    rgb = colorize(v[::-1], vmin, vmax, palette)  # image row 0 is the northern edge
    rgb = np.repeat(np.repeat(rgb, ppc, axis=0), ppc, axis=1)
    h, w = rgb.shape[:2]
    img = Image.new("RGB", (w, h + (LEGEND_HEIGHT if legend else 0)), BACKGROUND)
    img.paste(Image.fromarray(rgb, "RGB"), (0, 0))
    draw = ImageDraw.Draw(img)
    arm = max(3, 2 * ppc)
    for mx, my in markers:
        px = (mx - grid.origin[0]) / grid.spacing * ppc + ppc / 2.0
        py = h - ((my - grid.origin[1]) / grid.spacing * ppc + ppc / 2.0)
        px, py = int(round(px)), int(round(py))
        draw.line([(px - arm, py), (px + arm, py)], fill=MARKER_RGB, width=2)
        draw.line([(px, py - arm), (px, py + arm)], fill=MARKER_RGB, width=2)
    if legend:
        lut = palette_lut(palette)
        bar_w = max(1, w - 8)
        cols = lut[np.round(np.linspace(0, len(lut) - 1, bar_w)).astype(np.int64)]
        bar = np.repeat(cols[None], 8, axis=0)
        img.paste(Image.fromarray(bar, "RGB"), (4, h + 2))
        font = ImageFont.load_default()
        text = f"{label} [{vmin:g}, {vmax:g}]".strip()
        draw.text((4, h + 12), text, fill=(0, 0, 0), font=font)
    return img


def save_png(img, path):
    img.save(path, format="PNG")
    return path
