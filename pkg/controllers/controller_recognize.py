import logging
import os
from typing import List, Tuple

from models.image_buffer import load_image
from models.localizer import PlateLocalizer, make_localizer
from models.model_file import load_model
from models.plate_synth import read_manifest
from models.recognition import (PlateReading, RecognitionConfig,
                                recognize_image)
from views.view_cli import print_line
from views.view_overlay import save_overlay
from views.view_table import ViewTableReadings

logger = logging.getLogger(__name__)


def collect_inputs(args) -> List[Tuple[str, str]]:
    """
    (image id, image path) of the manifest split, or of the image files
    given on the command line, whose id is the file name stem.
    """
    if args.manifest is not None:
        _, records = read_manifest(args.manifest)
        root = os.path.dirname(os.path.abspath(args.manifest))
        return [(record.record_id, record.image_path(root))
                for record in records
                if args.split == "all" or record.split == args.split]
    return [(os.path.splitext(os.path.basename(path))[0], path)
            for path in args.images]


def build_localizer(args) -> PlateLocalizer:
    detections = args.detections
    if args.localizer == "annotation" and detections is None:
        detections = args.manifest
    return make_localizer(args.localizer, detections)


def recognition_config(args) -> RecognitionConfig:
    return RecognitionConfig(threshold=args.threshold,
                             overlap_ratio=args.overlap_ratio,
                             overlap_mode=args.overlap_mode)


class ControllerRecognize:
    """
    Controller of the recognize command: localize and read every input
    image, write the reading records and optional overlays.
    """
    def __init__(self, args, executor=None):
        self.args = args
        self.executor = executor
        self.models = None
        self.localizer = None
        self.config = None

    def read_one(self, item) -> PlateReading:
        image_id, path = item
        img = load_image(path)
        reading = recognize_image(img, self.localizer, self.models,
                                  config=self.config, image_id=image_id)
        if reading is None:
            logger.info("%s: no plate found", image_id)
            reading = PlateReading.no_plate(image_id)
        if self.args.overlay:
            save_overlay(img, reading,
                         os.path.join(self.args.overlay, f"{image_id}.png"))
        return reading

    def start(self) -> int:
        args = self.args
        self.models = load_model(args.model)
        self.localizer = build_localizer(args)
        self.config = recognition_config(args)
        inputs = collect_inputs(args)
        if self.executor is None:
            readings = [self.read_one(item) for item in inputs]
        else:
            readings = list(self.executor.map(self.read_one, inputs))
        if args.out:
            PlateReading.write_jsonl(args.out, readings,
                                     model=os.path.basename(args.model),
                                     localizer=args.localizer,
                                     recognition=self.config.to_dict())
        ViewTableReadings().show(readings)
        found = sum(1 for reading in readings if reading.found)
        print_line(f"{len(readings)} images, {found} plates read")
        return 0
