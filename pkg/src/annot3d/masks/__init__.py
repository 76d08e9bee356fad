"""Mesh projection masks and contact overlays."""

from .raster import DEFAULT_PALETTE, Mask, MaskLabel, rasterize_mask, render_overlay
from .imageio import read_pgm, read_ppm, write_pgm, write_ppm

__all__ = [
    "DEFAULT_PALETTE",
    "Mask",
    "MaskLabel",
    "rasterize_mask",
    "render_overlay",
    "read_pgm",
    "read_ppm",
    "write_pgm",
    "write_ppm",
]
