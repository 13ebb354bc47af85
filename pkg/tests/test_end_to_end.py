import json
import time

import pytest

from main import main
from models.evaluation import evaluate, timing_benchmark
from models.image_buffer import resize
from models.model_file import load_model
from models.plate_synth import RenderStyle, read_manifest, render_plate
from models.recognition import PlateReading, recognize_plate
from tests.conftest import CLEAN_STYLE

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """ 5000 augmented training plates, 1000 clean test plates, a 33-class model and its readings. """
    directory = tmp_path_factory.mktemp("end_to_end")
    train, test = directory / "train", directory / "test"
    assert main(["--seed", "2", "synth", "--n", "5000", "--out", str(train), "--train-fraction", "1.0"]) == 0
    assert main(["--seed", "3", "synth", "--n", "1000", "--out", str(test), "--train-fraction", "0.0",
                 "--no-augment"]) == 0
    model = str(directory / "model.bin")
    start = time.perf_counter()
    assert main(["--seed", "2", "train", "--manifest", str(train / "manifest.jsonl"), "--out", model]) == 0
    train_seconds = time.perf_counter() - start
    readings = str(directory / "readings.jsonl")
    assert main(["recognize", "--model", model, "--manifest", str(test / "manifest.jsonl"), "--split", "val",
                 "--out", readings]) == 0
    return str(test / "manifest.jsonl"), model, readings, train_seconds


@pytest.fixture(scope="module")
def mixtures(pipeline):
    return load_model(pipeline[1])


class TestSyntheticRun:
    def test_training_time(self, pipeline):
        assert pipeline[3] <= 30 * 60

    def test_accuracy_gate(self, pipeline, tmp_path):
        manifest, _, readings, _ = pipeline
        report = tmp_path / "report.jsonl"
        assert main(["eval", "--readings", readings, "--manifest", manifest, "--assert-accuracy", "0.85",
                     "--out", str(report)]) == 0
        summary = json.loads(report.read_text(encoding="utf-8").splitlines()[1])
        assert summary["n_images"] == 1000
        assert "confusable" in summary

    def test_character_precision_and_recall(self, pipeline):
        manifest, _, readings, _ = pipeline
        _, loaded = PlateReading.read_jsonl(readings)
        _, records = read_manifest(manifest)
        records = [record for record in records if record.split == "val"]
        report = evaluate({reading.image_id: reading for reading in loaded}, records)
        assert report.character_metrics.precision >= 0.90
        assert report.character_metrics.recall >= 0.90


class TestTrainedModels:
    def test_one_detection_per_character(self, mixtures):
        plate, _ = render_plate("18LH344", RenderStyle())
        reading = recognize_plate(plate, mixtures)
        assert [d.label for d in reading.detections] == list("18LH344")
        xs = [d.box.x for d in reading.detections]
        assert xs == sorted(xs)

    def test_clean_plate_is_read(self, mixtures):
        plate, _ = render_plate("23BU315", CLEAN_STYLE)
        assert recognize_plate(plate, mixtures).text == "23BU315"

    def test_latency_on_a_256_by_64_crop(self, mixtures):
        assert len(mixtures.alphabet) == 33
        plate, _ = render_plate("18LH344", RenderStyle())
        crop = resize(plate, 256, 64)
        stats, _ = timing_benchmark(lambda image: recognize_plate(image, mixtures), [crop], warmup=1, reps=5)
        assert stats.p50_ms < 500.0
