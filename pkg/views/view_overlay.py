"""
PNG renderings: a reading drawn over its input image, and the learned
part filters of a model drawn as oriented strokes per HOG cell.
"""
import logging
import math
import os
from typing import List

import numpy as np
from PIL import Image, ImageDraw

from models.hog import HOG_BINS
from models.image_buffer import ImageBuffer, save_png
from models.part_model import CharacterMixtureSet, CharacterTreeModel
from models.recognition import (BELOW_THRESHOLD, DIGIT_RULE_IGNORED,
                                OVERLAP_SUPPRESSED, PlateReading)

logger = logging.getLogger(__name__)

PLATE_COLOR = (0, 160, 255)
KEPT_COLOR = (0, 200, 0)
REJECTED_COLORS = {OVERLAP_SUPPRESSED: (255, 140, 0),
                   DIGIT_RULE_IGNORED: (220, 0, 0),
                   BELOW_THRESHOLD: (128, 128, 128)}
PIXELS_PER_CELL = 16


def to_pil(img: ImageBuffer) -> Image.Image:
    array = np.round(img.pixels * 255.0).astype(np.uint8)
    if img.channels == 1:
        return Image.fromarray(array[:, :, 0]).convert("RGB")
    return Image.fromarray(array)


def from_pil(image: Image.Image) -> ImageBuffer:
    return ImageBuffer(np.asarray(image, dtype=np.float64) / 255.0)


def draw_reading(img: ImageBuffer, reading: PlateReading,
                 show_rejected: bool = True) -> Image.Image:
    """
    Plate box in blue, kept characters in green with label and score,
    rejected detections in the color of their reason.
    """
    canvas = to_pil(img)
    draw = ImageDraw.Draw(canvas)
    if reading.plate_box is not None:
        box = reading.plate_box
        draw.rectangle((box.x, box.y, box.x2 - 1, box.y2 - 1),
                       outline=PLATE_COLOR, width=2)
        draw.text((box.x, max(0, box.y - 12)), reading.text or "?",
                  fill=PLATE_COLOR)
    if show_rejected:
        for rejection in reading.rejected:
            box = rejection.detection.box
            draw.rectangle((box.x, box.y, box.x2 - 1, box.y2 - 1),
                           outline=REJECTED_COLORS[rejection.reason])
    for detection in reading.detections:
        box = detection.box
        draw.rectangle((box.x, box.y, box.x2 - 1, box.y2 - 1),
                       outline=KEPT_COLOR)
        draw.text((box.x + 1, box.y2 + 1),
                  f"{detection.label} {detection.score:.2f}",
                  fill=KEPT_COLOR)
    return canvas


def save_overlay(img: ImageBuffer, reading: PlateReading, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    draw_reading(img, reading).save(path, format="PNG")


def _draw_filter(draw: ImageDraw.ImageDraw, weights: np.ndarray,
                 origin_x: int, origin_y: int, scale: float):
    half = PIXELS_PER_CELL / 2.0
    h_cells, w_cells, dim = weights.shape
    # the four normalizations of a bin share one stroke
    per_bin = np.maximum(weights, 0.0).reshape(h_cells, w_cells,
                                               dim // HOG_BINS,
                                               HOG_BINS).sum(axis=2)
    for cy in range(h_cells):
        for cx in range(w_cells):
            center_x = origin_x + (cx + 0.5) * PIXELS_PER_CELL
            center_y = origin_y + (cy + 0.5) * PIXELS_PER_CELL
            for b in range(HOG_BINS):
                value = per_bin[cy, cx, b] * scale
                if value <= 0.0:
                    continue
                # strokes run along the edge, across the gradient
                angle = (b + 0.5) * math.pi / HOG_BINS + math.pi / 2.0
                dx, dy = half * math.cos(angle), half * math.sin(angle)
                shade = int(round(min(1.0, value) * 255))
                draw.line((center_x - dx, center_y - dy,
                           center_x + dx, center_y + dy),
                          fill=shade, width=1)


def render_template(model: CharacterTreeModel) -> ImageBuffer:
    """
    Root filter on the left; children on the right at their anchor offsets.
    Stroke intensity is the positive weight mass of each orientation bin.
    """
    root = model.root_filter
    width = root.w_cells * PIXELS_PER_CELL
    height = root.h_cells * PIXELS_PER_CELL
    canvas = Image.new("L", (2 * width + PIXELS_PER_CELL, height), 0)
    draw = ImageDraw.Draw(canvas)
    peak = max(float(np.max(part.weights)) for part in model.parts)
    scale = 1.0 / peak if peak > 0.0 else 0.0
    _draw_filter(draw, root.weights, 0, 0, scale)
    for i, part in enumerate(model.parts):
        if i == model.root:
            continue
        ax, ay = part.anchor
        _draw_filter(draw, part.weights,
                     width + PIXELS_PER_CELL + ax * PIXELS_PER_CELL,
                     ay * PIXELS_PER_CELL, scale)
    return from_pil(canvas)


def render_templates(mixtures: CharacterMixtureSet, out_dir: str) \
        -> List[str]:
    """ One PNG per mixture component, named <label>_<mixture>.png. """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for label, index, model in mixtures.models():
        path = os.path.join(out_dir, f"{label}_{index}.png")
        save_png(render_template(model), path)
        paths.append(path)
    logger.info("rendered %d templates to %s", len(paths), out_dir)
    return paths
