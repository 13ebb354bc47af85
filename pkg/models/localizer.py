"""
Plate localization backends. Each returns at most one box inside the image,
or None when no plate is found.
"""
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, asdict
from typing import Dict, Optional

import numpy as np
from scipy import ndimage

from models.base_model import _BaseModel
from models.exceptions import ParameterError, RecordLookupError
from models.hog import compute_gradients
from models.image_buffer import BoundingBox, ImageBuffer, to_grayscale
from models.plate_synth import SynthRecord

logger = logging.getLogger(__name__)

LOCALIZERS = ("annotation", "heuristic", "full")


class PlateAnnotation(_BaseModel):
    def __init__(self, record_id: str, plate_box: BoundingBox):
        """
        Plate box of one image, as found in a detections file.
        :param record_id: image id, the file name stem of the image
        """
        self.record_id = record_id
        self.plate_box = plate_box

    @classmethod
    def _create_instance_from_json(cls, item_data: Dict[str, object]):
        return cls(item_data["id"],
                   BoundingBox.from_list(item_data["plate_box"]))

    def _prepare_data_to_save(self) -> Dict[str, object]:
        return {"id": self.record_id, "plate_box": self.plate_box.to_list()}


class PlateLocalizer(ABC):
    name = ""

    @abstractmethod
    def localize(self, img: ImageBuffer, image_id: Optional[str] = None) \
            -> Optional[BoundingBox]:
        raise NotImplementedError


class AnnotationLocalizer(PlateLocalizer):
    """ Returns the recorded plate box of an image id. """
    name = "annotation"

    def __init__(self, boxes: Dict[str, BoundingBox]):
        self.boxes = boxes

    @classmethod
    def from_file(cls, path: str) -> "AnnotationLocalizer":
        """ Accepts a plate detections file or a synthetic manifest. """
        with open(path, 'r', encoding='utf-8') as file:
            header = json.loads(file.readline())
        if header.get("schema") == SynthRecord.class_name_plural():
            _, records = SynthRecord.read_jsonl(path)
        else:
            _, records = PlateAnnotation.read_jsonl(path)
        return cls({r.record_id: r.plate_box for r in records})

    def localize(self, img, image_id=None):
        if image_id not in self.boxes:
            raise RecordLookupError(f"no plate annotation for image "
                                    f"'{image_id}'")
        box = self.boxes[image_id]
        return box.clipped(img.width, img.height)


class FullImageLocalizer(PlateLocalizer):
    """ The image is the plate crop. """
    name = "full"

    def localize(self, img, image_id=None):
        return BoundingBox(0, 0, img.width, img.height)


@dataclass(frozen=True)
class HeuristicConfig:
    edge_fraction: float = 0.25
    min_edge: float = 0.02
    close_fraction: float = 0.06
    min_aspect: float = 3.0
    max_aspect: float = 6.0
    min_area_fraction: float = 0.002

    def __post_init__(self):
        if not 0.0 < self.min_aspect <= self.max_aspect:
            raise ParameterError("aspect range must satisfy "
                                 "0 < min_aspect <= max_aspect")

    def to_dict(self):
        return asdict(self)


class HeuristicLocalizer(PlateLocalizer):
    """
    Edge-density search: threshold the gradient magnitude, close the edge
    map horizontally so characters merge into one blob, fill holes and keep
    the connected component with plate aspect ratio and the densest edges.
    """
    name = "heuristic"

    def __init__(self, config: HeuristicConfig = HeuristicConfig()):
        self.config = config

    def edge_map(self, img: ImageBuffer) -> np.ndarray:
        magnitude, _ = compute_gradients(to_grayscale(img))
        peak = float(magnitude.max())
        if peak <= 0.0:
            return np.zeros(magnitude.shape, dtype=bool)
        threshold = max(self.config.min_edge,
                        self.config.edge_fraction * peak)
        return magnitude >= threshold

    def localize(self, img, image_id=None):
        config = self.config
        edges = self.edge_map(img)
        if not edges.any():
            return None
        reach = max(3, int(round(config.close_fraction * img.width)))
        closed = ndimage.binary_closing(edges,
                                        structure=np.ones((1, reach)))
        closed = ndimage.binary_closing(
            closed, structure=np.ones((max(3, reach // 3), 1)))
        filled = ndimage.binary_fill_holes(closed | edges)
        labels, count = ndimage.label(filled)
        min_area = config.min_area_fraction * img.width * img.height
        best = None
        for index, region in enumerate(ndimage.find_objects(labels), 1):
            if region is None:
                continue
            rows, cols = region
            h, w = rows.stop - rows.start, cols.stop - cols.start
            if w * h < min_area or not config.min_aspect <= w / h \
                    <= config.max_aspect:
                continue
            density = float(edges[region].mean())
            if best is None or density > best[0]:
                best = (density, BoundingBox(cols.start, rows.start, w, h))
        logger.debug("heuristic localizer: %d components, best %s", count,
                     None if best is None else best[1])
        return None if best is None else best[1]


def make_localizer(kind: str, detections: Optional[str] = None,
                   config: HeuristicConfig = HeuristicConfig()) \
        -> PlateLocalizer:
    match kind:
        case "annotation":
            if detections is None:
                raise ParameterError("the annotation localizer needs a "
                                     "detections file")
            return AnnotationLocalizer.from_file(detections)
        case "heuristic":
            return HeuristicLocalizer(config)
        case "full":
            return FullImageLocalizer()
        case _:
            raise ParameterError(f"unknown localizer '{kind}', expected one "
                                 f"of {LOCALIZERS}")


def localize_plate(img: ImageBuffer, localizer: PlateLocalizer,
                   image_id: Optional[str] = None) -> Optional[BoundingBox]:
    return localizer.localize(img, image_id)
