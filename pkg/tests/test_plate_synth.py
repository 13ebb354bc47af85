import numpy as np
import pytest

from models.exceptions import FontError, ParameterError, PreconditionError
from models.image_buffer import BoundingBox, ImageBuffer
from models.part_model import ALPHABET
from models.plate_synth import (AugmentConfig, AugmentParams, DatasetSpec, PlateFormat, PlateGroup, RenderStyle,
                                apply_augment, compose_scene, default_font, generate_dataset,
                                generate_plate_string, read_manifest, render_plate, sample_augment,
                                separate_boxes, synthesize_record, transform_boxes)


class TestPlateFormat:
    def test_generated_strings_follow_the_format(self):
        plate_format = PlateFormat()
        rng = np.random.default_rng(0)
        for _ in range(200):
            text = generate_plate_string(plate_format, rng)
            assert 7 <= len(text) <= 8
            assert text[:2].isdigit() and text[-2:].isdigit()
            assert plate_format.matches(text)

    def test_matches(self):
        plate_format = PlateFormat()
        assert plate_format.matches("18LH344")
        assert plate_format.matches("01DY500")
        assert not plate_format.matches("1A23456")
        assert not plate_format.matches("18QH344")

    def test_first_group_must_be_two_digits(self):
        with pytest.raises(ParameterError):
            PlateFormat(groups=(PlateGroup("letters", 2, 2), PlateGroup("digits", 2, 4)))

    def test_dict_round_trip(self):
        plate_format = PlateFormat()
        assert PlateFormat.from_dict(plate_format.to_dict()) == plate_format


class TestFont:
    def test_every_class_has_a_glyph(self):
        font = default_font()
        for label in ALPHABET:
            assert font.glyph(label).shape == (7, 5)

    def test_distinct_glyphs_for_lookalikes(self):
        font = default_font()
        assert not np.array_equal(font.glyph("0"), font.glyph("O"))
        assert not np.array_equal(font.glyph("1"), font.glyph("I"))

    def test_missing_glyph(self):
        with pytest.raises(FontError):
            default_font().glyph("Q")


class TestRenderPlate:
    def test_boxes_are_tight_ordered_and_inside(self, clean_style):
        plate, boxes = render_plate("18LH344", clean_style)
        assert len(boxes) == 7
        assert all(box.within(plate.width, plate.height) for box in boxes)
        assert all(a.x2 <= b.x for a, b in zip(boxes, boxes[1:]))
        ink = plate.pixels[:, :, 0] < 0.5
        for box in boxes:
            assert ink[box.y:box.y2, box.x:box.x2].any()

    def test_group_change_adds_a_gap(self, clean_style):
        one_group, _ = render_plate("1111", clean_style)
        two_groups, _ = render_plate("11AA", clean_style)
        three_groups, _ = render_plate("1AA1", clean_style)
        assert two_groups.width == one_group.width + clean_style.group_gap
        assert three_groups.width == one_group.width + 2 * clean_style.group_gap
        assert two_groups.height == one_group.height == clean_style.char_height + 2 * clean_style.margin

    def test_nir_plates_are_channel_clones(self):
        style = RenderStyle(spectrum="NIR", background=(0.8,) * 3, foreground=(0.1,) * 3)
        plate, _ = render_plate("23BU315", style)
        assert plate.channels == 3
        assert np.array_equal(plate.pixels[:, :, 0], plate.pixels[:, :, 2])

    def test_empty_text(self, clean_style):
        with pytest.raises(PreconditionError):
            render_plate("", clean_style)

    def test_small_characters_are_rejected(self):
        with pytest.raises(ParameterError):
            RenderStyle(char_height=12)


class TestAugment:
    def test_zero_magnitudes_leave_the_image_alone(self, clean_style):
        plate, boxes = render_plate("23BU315", clean_style)
        params = sample_augment(np.random.default_rng(1), AugmentConfig.none(), (plate.width, plate.height))
        assert apply_augment(plate, params) is plate
        assert transform_boxes(boxes, params, (plate.width, plate.height)) == boxes

    def test_augmented_pixels_stay_in_range(self, clean_style):
        plate, _ = render_plate("23BU315", clean_style)
        params = sample_augment(np.random.default_rng(2), AugmentConfig(), (plate.width, plate.height))
        result = apply_augment(plate, params)
        assert (result.width, result.height) == (plate.width, plate.height)
        assert 0.0 <= result.pixels.min() and result.pixels.max() <= 1.0

    def test_small_rotation_keeps_boxes_near_the_glyphs(self, clean_style):
        plate, boxes = render_plate("23BU315", clean_style)
        params = AugmentParams(rotation_deg=2.0)
        moved = transform_boxes(boxes, params, (plate.width, plate.height))
        for before, after in zip(boxes, moved):
            assert before.iou(after) > 0.5

    def test_augmentation_is_seeded(self, clean_style):
        plate, _ = render_plate("23BU315", clean_style)
        dims = (plate.width, plate.height)
        first = apply_augment(plate, sample_augment(np.random.default_rng(3), AugmentConfig(), dims))
        second = apply_augment(plate, sample_augment(np.random.default_rng(3), AugmentConfig(), dims))
        assert first == second

    def test_warped_neighbours_do_not_overlap(self):
        plate, boxes = render_plate("11111111", RenderStyle(char_height=40, gap=1, margin=8, group_gap=8))
        params = AugmentParams(rotation_deg=3.0, corners=((2.0, 0.0), (-2.0, 1.0), (0.0, 0.0), (1.0, -1.0)))
        moved = transform_boxes(boxes, params, (plate.width, plate.height))
        for a, b in zip(moved, moved[1:]):
            assert a.intersection(b) == 0
            assert a.x2 <= b.x


class TestSeparateBoxes:
    def test_overlap_is_cut_in_the_middle(self):
        left, right = BoundingBox(15, 15, 25, 40), BoundingBox(38, 15, 24, 39)
        assert separate_boxes([left, right]) == [BoundingBox(15, 15, 24, 40), BoundingBox(39, 15, 23, 39)]

    def test_disjoint_boxes_are_kept(self):
        boxes = [BoundingBox(0, 0, 10, 20), BoundingBox(10, 0, 10, 20), BoundingBox(25, 2, 8, 18)]
        assert separate_boxes(boxes) == boxes

    def test_chain_of_overlaps(self):
        boxes = [BoundingBox(0, 0, 12, 20), BoundingBox(8, 0, 12, 20), BoundingBox(16, 0, 12, 20)]
        separated = separate_boxes(boxes)
        for i, first in enumerate(separated):
            assert first.w >= 1
            for second in separated[i + 1:]:
                assert first.intersection(second) == 0


def count_overlapping_pairs(n_records, seed):
    spec = DatasetSpec(n=n_records, seed=seed)
    overlapping = 0
    for index in range(n_records):
        _, record = synthesize_record(index, spec, "train", "NIR" if index % 2 else "RGB")
        boxes = [box for _, box in record.chars]
        overlapping += sum(a.intersection(b) > 0 for i, a in enumerate(boxes) for b in boxes[i + 1:])
    return overlapping


class TestSynthesizedCharacterBoxes:
    def test_boxes_are_disjoint(self):
        assert count_overlapping_pairs(60, seed=11) == 0

    @pytest.mark.slow
    def test_boxes_are_disjoint_on_400_records(self):
        assert count_overlapping_pairs(400, seed=12) == 0


class TestComposeScene:
    def test_plate_lands_inside_the_scene(self, clean_style):
        plate, boxes = render_plate("23BU315", clean_style)
        scene, plate_box, shifted = compose_scene(plate, boxes, np.random.default_rng(4), (400, 200))
        assert (scene.width, scene.height) == (400, 200)
        assert plate_box.within(400, 200)
        assert shifted[0].x == boxes[0].x + plate_box.x
        np.testing.assert_array_equal(
            scene.pixels[plate_box.y:plate_box.y2, plate_box.x:plate_box.x2], plate.pixels)

    def test_plate_larger_than_scene(self, clean_style):
        plate, boxes = render_plate("23BU315", clean_style)
        with pytest.raises(PreconditionError):
            compose_scene(plate, boxes, np.random.default_rng(4), (100, 40))


class TestGenerateDataset:
    def test_counts_split_and_spectra(self, tmp_path):
        spec = DatasetSpec(n=10, seed=7, augment=AugmentConfig.none())
        manifest, records = generate_dataset(spec, str(tmp_path))
        header, loaded = read_manifest(manifest)
        assert header["seed"] == 7 and header["n"] == 10
        assert [r.record_id for r in loaded] == [f"{i:06d}" for i in range(10)]
        assert sum(r.split == "train" for r in loaded) == 8
        assert sum(r.spectrum == "NIR" for r in loaded) == 5
        for record in loaded:
            assert (tmp_path / record.image).is_file()
            assert "".join(label for label, _ in record.chars) == record.text

    def test_same_seed_gives_identical_files(self, tmp_path):
        spec = DatasetSpec(n=4, seed=3)
        first, _ = generate_dataset(spec, str(tmp_path / "a"))
        second, _ = generate_dataset(spec, str(tmp_path / "b"))
        assert open(first, "rb").read() == open(second, "rb").read()
        for i in range(4):
            name = f"images/{i:06d}.png"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_scenes_record_the_plate_box(self, tmp_path):
        spec = DatasetSpec(n=2, seed=1, augment=AugmentConfig.none(), scene_size=(480, 200))
        _, records = generate_dataset(spec, str(tmp_path))
        for record in records:
            assert record.plate_box.within(480, 200)
            assert all(box.x >= record.plate_box.x for _, box in record.chars)

    def test_empty_dataset(self):
        with pytest.raises(PreconditionError):
            DatasetSpec(n=0)


class TestSynthRecordImage:
    def test_image_matches_the_recorded_size(self, tmp_path):
        from models.image_buffer import load_image
        _, records = generate_dataset(DatasetSpec(n=1, seed=2), str(tmp_path))
        img = load_image(records[0].image_path(str(tmp_path)))
        assert isinstance(img, ImageBuffer)
        assert records[0].plate_box == BoundingBox(0, 0, img.width, img.height)
