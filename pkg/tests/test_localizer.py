import numpy as np
import pytest

from models.exceptions import ParameterError, RecordLookupError
from models.image_buffer import BoundingBox, ImageBuffer
from models.localizer import (AnnotationLocalizer, FullImageLocalizer, HeuristicConfig, HeuristicLocalizer,
                              PlateAnnotation, localize_plate, make_localizer)
from models.plate_synth import AugmentConfig, DatasetSpec, generate_dataset


class TestHeuristicLocalizer:
    def test_finds_the_planted_plate(self, planted_plate):
        scene, truth = planted_plate
        box = localize_plate(scene, HeuristicLocalizer())
        assert box is not None
        assert box.iou(truth) >= 0.8

    def test_blank_image(self):
        blank = ImageBuffer(np.full((200, 400, 3), 0.5))
        assert HeuristicLocalizer().localize(blank) is None

    def test_no_plate_shaped_region(self):
        pixels = np.full((200, 200, 1), 0.3)
        pixels[50:150, 50:150] = 0.9
        assert HeuristicLocalizer().localize(ImageBuffer(pixels)) is None

    def test_bad_aspect_range(self):
        with pytest.raises(ParameterError):
            HeuristicConfig(min_aspect=5.0, max_aspect=4.0)


class TestAnnotationLocalizer:
    def test_lookup_and_clipping(self):
        localizer = AnnotationLocalizer({"000001": BoundingBox(10, 10, 100, 30)})
        img = ImageBuffer(np.zeros((30, 60, 1)))
        assert localizer.localize(img, "000001") == BoundingBox(10, 10, 50, 20)

    def test_missing_id(self):
        localizer = AnnotationLocalizer({})
        with pytest.raises(RecordLookupError):
            localizer.localize(ImageBuffer(np.zeros((10, 10, 1))), "000001")

    def test_reads_a_detections_file(self, tmp_path):
        path = str(tmp_path / "plates.jsonl")
        PlateAnnotation.write_jsonl(path, [PlateAnnotation("a", BoundingBox(1, 2, 30, 10))])
        localizer = make_localizer("annotation", path)
        assert localizer.boxes == {"a": BoundingBox(1, 2, 30, 10)}

    def test_reads_a_manifest(self, tmp_path):
        manifest, records = generate_dataset(DatasetSpec(n=2, augment=AugmentConfig.none()), str(tmp_path))
        localizer = AnnotationLocalizer.from_file(manifest)
        assert localizer.boxes == {r.record_id: r.plate_box for r in records}


class TestMakeLocalizer:
    def test_kinds(self):
        assert isinstance(make_localizer("heuristic"), HeuristicLocalizer)
        assert isinstance(make_localizer("full"), FullImageLocalizer)

    def test_full_image(self):
        img = ImageBuffer(np.zeros((20, 70, 3)))
        assert make_localizer("full").localize(img) == BoundingBox(0, 0, 70, 20)

    def test_annotation_needs_a_file(self):
        with pytest.raises(ParameterError):
            make_localizer("annotation")

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            make_localizer("yolo")
