import json

import pytest

from main import main
from models.image_buffer import BoundingBox, save_png
from models.model_file import load_model
from models.part_model import Detection
from models.plate_synth import SynthRecord, render_plate
from models.recognition import PlateReading
from tests.conftest import CLEAN_STYLE


def write_manifest(directory, texts):
    records = []
    (directory / "images").mkdir(parents=True, exist_ok=True)
    for i, text in enumerate(texts):
        plate, boxes = render_plate(text, CLEAN_STYLE)
        record_id = f"{i:06d}"
        save_png(plate, str(directory / "images" / f"{record_id}.png"))
        records.append(SynthRecord(record_id, f"images/{record_id}.png", text,
                                   BoundingBox(0, 0, plate.width, plate.height), list(zip(text, boxes)),
                                   "RGB", "train", 0))
    path = directory / "manifest.jsonl"
    SynthRecord.write_jsonl(str(path), records, seed=0, n=len(records))
    return str(path), records


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    directory = tmp_path_factory.mktemp("cli")
    manifest, records = write_manifest(directory, ["11A11", "1AA1", "22B33"])
    model = str(directory / "model.bin")
    assert main(["--threads", "1", "train", "--manifest", manifest, "--out", model, "--classes", "1A",
                 "--epochs", "0"]) == 0
    return directory, manifest, records, model


class TestArguments:
    def test_show_config(self, capsys):
        assert main(["--show-config"]) == 0
        config = json.loads(capsys.readouterr().out)
        assert config["hog"]["cell_size"] == 4
        assert config["recognition"]["overlap_ratio"] == 0.7

    def test_no_command(self):
        assert main([]) == 2

    def test_bad_values(self, tmp_path):
        assert main(["synth", "--n", "0", "--out", str(tmp_path)]) == 2
        assert main(["synth", "--n", "3", "--out", str(tmp_path), "--train-fraction", "1.5"]) == 2
        assert main(["eval", "--readings", str(tmp_path / "nope"), "--manifest", str(tmp_path / "nope")]) == 2

    def test_recognize_needs_inputs(self, tmp_path):
        assert main(["recognize", "--model", str(tmp_path / "model.bin")]) == 2

    def test_model_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LPR_MODEL_PATH", str(tmp_path / "missing.bin"))
        image = tmp_path / "plate.png"
        plate, _ = render_plate("11A11", CLEAN_STYLE)
        save_png(plate, str(image))
        assert main(["recognize", str(image)]) == 1

    def test_negative_regularization(self, workspace, tmp_path):
        _, manifest, _, _ = workspace
        assert main(["train", "--manifest", manifest, "--out", str(tmp_path / "m.bin"), "--classes", "1A",
                     "--reg-c", "-0.5"]) == 2
        assert not (tmp_path / "m.bin").exists()

    def test_repeated_classes(self, workspace, tmp_path):
        _, manifest, _, _ = workspace
        assert main(["train", "--manifest", manifest, "--out", str(tmp_path / "m.bin"), "--classes", "11"]) == 2


class TestSynth:
    def test_deterministic_across_threads(self, tmp_path, capsys):
        args = ["synth", "--n", "4", "--out"]
        assert main(["--threads", "1", "--seed", "5"] + args + [str(tmp_path / "a")]) == 0
        assert main(["--threads", "3", "--seed", "5"] + args + [str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == (tmp_path / "b" / "manifest.jsonl").read_bytes()
        for i in range(4):
            name = f"{i:06d}.png"
            assert (tmp_path / "a" / "images" / name).read_bytes() == \
                (tmp_path / "b" / "images" / name).read_bytes()
        assert "images: 4" in capsys.readouterr().out

    def test_scenes(self, tmp_path):
        assert main(["synth", "--n", "2", "--out", str(tmp_path), "--scenes", "--scene-size", "500x200"]) == 0
        _, records = SynthRecord.read_jsonl(str(tmp_path / "manifest.jsonl"))
        assert all(record.plate_box.within(500, 200) for record in records)


class TestTrain:
    def test_initialization_only_model(self, workspace, capsys):
        _, _, _, model = workspace
        assert load_model(model).alphabet == "1A"

    def test_training_log(self, workspace, tmp_path, capsys):
        _, manifest, _, _ = workspace
        log = tmp_path / "train.log"
        model = tmp_path / "model.bin"
        assert main(["--threads", "2", "train", "--manifest", manifest, "--out", str(model), "--classes", "1A",
                     "--epochs", "1", "--latent-rounds", "1", "--log", str(log)]) == 0
        lines = log.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert lines[-1] in capsys.readouterr().out

    def test_missing_class(self, workspace, tmp_path):
        _, manifest, _, _ = workspace
        assert main(["train", "--manifest", manifest, "--out", str(tmp_path / "m.bin"), "--classes", "1Z"]) == 1

    def test_empty_split(self, workspace, tmp_path):
        _, manifest, _, _ = workspace
        assert main(["train", "--manifest", manifest, "--split", "val", "--out", str(tmp_path / "m.bin"),
                     "--classes", "1A"]) == 1


class TestRecognizeAndEval:
    def test_missing_model(self, workspace, tmp_path):
        _, manifest, _, _ = workspace
        assert main(["recognize", "--model", str(tmp_path / "missing.bin"), "--manifest", manifest,
                     "--split", "all"]) == 1

    def test_recognize_then_gate(self, workspace, tmp_path):
        directory, manifest, records, model = workspace
        readings = tmp_path / "readings.jsonl"
        assert main(["recognize", "--model", model, "--manifest", manifest, "--split", "all",
                     "--out", str(readings), "--overlay", str(tmp_path / "overlays")]) == 0
        _, loaded = PlateReading.read_jsonl(str(readings))
        assert [r.image_id for r in loaded] == [r.record_id for r in records]
        assert all(set(r.text) <= set("1A") for r in loaded)
        assert (tmp_path / "overlays" / "000000.png").is_file()
        base = ["eval", "--readings", str(readings), "--manifest", manifest, "--split", "all"]
        assert main(base + ["--assert-accuracy", "0.0"]) == 0
        # no model for '2', 'B' or '3', so one plate can never be read
        assert main(base + ["--assert-accuracy", "1.0"]) == 3

    def test_perfect_readings_pass_the_gate(self, workspace, tmp_path, capsys):
        _, manifest, records, _ = workspace
        readings = [PlateReading(r.record_id, r.plate_box, [Detection(box, label, 1.0) for label, box in r.chars])
                    for r in records]
        path = tmp_path / "readings.jsonl"
        PlateReading.write_jsonl(str(path), readings)
        report = tmp_path / "report.jsonl"
        assert main(["eval", "--readings", str(path), "--manifest", manifest, "--split", "all",
                     "--group-by", "spectrum", "--assert-accuracy", "1.0", "--out", str(report)]) == 0
        assert "recognition accuracy: 1.000 (3/3)" in capsys.readouterr().out
        lines = report.read_text(encoding="utf-8").splitlines()
        assert json.loads(lines[0])["schema"] == "evalreports"
        assert [json.loads(line)["group"] for line in lines[1:]] == ["all", "RGB"]

    def test_mismatched_ids(self, workspace, tmp_path):
        _, manifest, records, _ = workspace
        path = tmp_path / "readings.jsonl"
        PlateReading.write_jsonl(str(path), [PlateReading.no_plate(records[0].record_id)])
        assert main(["eval", "--readings", str(path), "--manifest", manifest, "--split", "all"]) == 1

    def test_annotation_localizer_and_bench(self, workspace, capsys):
        _, manifest, _, model = workspace
        assert main(["--threads", "2", "bench", "--model", model, "--manifest", manifest, "--split", "all",
                     "--localizer", "annotation", "--warmup", "0", "--reps", "2"]) == 0
        assert "3 images x 2 reps" in capsys.readouterr().out


class TestInspect:
    def test_exports(self, workspace, tmp_path, capsys):
        _, _, _, model = workspace
        export = tmp_path / "model.json"
        assert main(["inspect", "--model", model, "--json", str(export), "--render", str(tmp_path / "t")]) == 0
        data = json.loads(export.read_text(encoding="utf-8"))
        assert data["alphabet"] == "1A"
        assert (tmp_path / "t" / "A_0.png").is_file()
        assert "2 templates" in capsys.readouterr().out
