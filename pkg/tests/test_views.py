import io

import numpy as np

from models.image_buffer import BoundingBox, ImageBuffer, load_image
from models.part_model import CharacterMixtureSet, Detection, default_topology
from models.recognition import BELOW_THRESHOLD, PlateReading, Rejection
from models.trainer import model_to_vector, project_deformation, vector_to_model
from views.view_overlay import (KEPT_COLOR, REJECTED_COLORS, draw_reading, render_template, render_templates,
                               save_overlay)
from views.view_table import ViewTable, ViewTableConfusable, ViewTableReadings


def sample_reading():
    detections = [Detection(BoundingBox(10 + 20 * i, 10, 16, 30), label, 0.5) for i, label in enumerate("18LH344")]
    rejected = [Rejection(Detection(BoundingBox(170, 60, 12, 12), "7", -0.1), BELOW_THRESHOLD)]
    return PlateReading("42", BoundingBox(4, 4, 180, 50), detections, rejected)


class TestViewTable:
    def test_separator_line_matches_the_header(self):
        header = "ID" + ViewTable.SEPARATOR + "Plate"
        line = ViewTable.update_separator_line(header)
        assert len(line) == len(header)
        assert line == "──" + "─┼─" + "─────"

    def test_reformat_helpers(self):
        assert ViewTable.reformat_id("42") == "#000042"
        assert ViewTable.reformat_name("abcdefgh", 5) == "abcd."
        assert ViewTable.reformat_name("ab", 4) == "ab  "
        assert ViewTable.reformat_number(None, 3) == "  -"
        assert ViewTable.reformat_number(7, 3) == "  7"
        assert ViewTable.reformat_number(0.5, 6) == " 0.500"

    def test_readings_table(self):
        stream = io.StringIO()
        ViewTableReadings(stream).show([sample_reading(), PlateReading.no_plate("43")])
        lines = stream.getvalue().splitlines()
        assert len(lines) == 4
        assert lines[2].startswith("#000042")
        assert "18LH344" in lines[2] and "no plate" in lines[3]
        assert all(len(line) == len(lines[0]) for line in lines)

    def test_confusable_table(self):
        stream = io.StringIO()
        ViewTableConfusable(stream).show_pairs({"0->D": 3, "D->0": 0})
        assert stream.getvalue().splitlines()[2].split(ViewTable.SEPARATOR)[1].strip() == "3"


class TestOverlay:
    def test_draws_kept_and_rejected_boxes(self):
        img = ImageBuffer(np.full((80, 200, 3), 0.2))
        canvas = draw_reading(img, sample_reading())
        assert canvas.size == (200, 80)
        assert canvas.getpixel((30, 10)) == KEPT_COLOR
        assert canvas.getpixel((170, 60)) == REJECTED_COLORS[BELOW_THRESHOLD]
        hidden = draw_reading(img, sample_reading(), show_rejected=False)
        assert hidden.getpixel((170, 60)) == (51, 51, 51)

    def test_save_creates_the_directory(self, tmp_path):
        path = tmp_path / "overlays" / "42.png"
        save_overlay(ImageBuffer(np.full((80, 200, 1), 0.2)), sample_reading(), str(path))
        img = load_image(str(path))
        assert (img.width, img.height) == (200, 80)


class TestTemplates:
    def test_template_size(self):
        template = render_template(default_topology("A"))
        assert (template.width, template.height) == (2 * 64 + 16, 128)
        assert template.pixels.max() == 0.0

    def test_positive_weights_are_drawn(self):
        template = default_topology("A")
        vector = np.abs(np.random.default_rng(0).normal(size=model_to_vector(template).size))
        model = project_deformation(vector_to_model(template, vector))
        assert render_template(model).pixels.max() > 0.0

    def test_one_file_per_component(self, tmp_path):
        mixtures = CharacterMixtureSet("1A", {"1": [default_topology("1")], "A": [default_topology("A")]})
        paths = render_templates(mixtures, str(tmp_path / "templates"))
        assert [p.split("/")[-1] for p in paths] == ["1_0.png", "A_0.png"]
        assert all((tmp_path / "templates" / name).is_file() for name in ("1_0.png", "A_0.png"))
