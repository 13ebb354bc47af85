import numpy as np
import pytest
from scipy import ndimage

from models.image_buffer import BoundingBox, ImageBuffer, paste, save_png
from models.plate_synth import RenderStyle, render_plate
from models.trainer import TrainingSample

CLEAN_STYLE = RenderStyle(char_height=32, gap=4, margin=8, group_gap=8)


@pytest.fixture
def clean_style():
    return CLEAN_STYLE


def textured_scene(rng, width, height):
    texture = ndimage.gaussian_filter(rng.normal(size=(height, width)), 12.0)
    texture = 0.25 + 0.3 * (texture - texture.min()) / (texture.max() - texture.min())
    return ImageBuffer(np.repeat(texture[:, :, np.newaxis], 3, axis=2))


@pytest.fixture
def planted_plate():
    """ A clean '23BU315' plate pasted at (150, 120) of a 480x320 scene. """
    plate, boxes = render_plate("23BU315", CLEAN_STYLE)
    scene = paste(textured_scene(np.random.default_rng(0), 480, 320), plate, 150, 120)
    return scene, BoundingBox(150, 120, plate.width, plate.height)


def write_plates(directory, texts):
    """ Render and save clean plates; returns their training samples. """
    samples = []
    for i, text in enumerate(texts):
        plate, boxes = render_plate(text, CLEAN_STYLE)
        path = str(directory / f"{i:06d}.png")
        save_png(plate, path)
        plate_box = BoundingBox(0, 0, plate.width, plate.height)
        for label, box in zip(text, boxes):
            samples.append(TrainingSample(f"{i:06d}", path, plate_box, label, box))
        samples.append(TrainingSample(f"{i:06d}", path, plate_box, positive=False))
    return samples
