"""
Plate detection accuracy, full-string recognition accuracy with a
per-character confusion matrix, character detection precision and recall,
and latency measurement.
"""
import logging
import time
from dataclasses import dataclass, asdict
from typing import (Callable, Dict, List, Mapping, NamedTuple, Optional,
                    Sequence, Tuple)

import numpy as np

from models.base_model import _BaseModel
from models.exceptions import KeyingError, PreconditionError
from models.image_buffer import BoundingBox
from models.part_model import ALPHABET
from models.plate_synth import SynthRecord
from models.recognition import PlateReading

logger = logging.getLogger(__name__)

MISSED = "missed"
CONFUSION_LABELS = tuple(ALPHABET) + (MISSED,)
CONFUSABLE_PAIRS = (("0", "D"), ("S", "8"), ("3", "9"), ("Y", "V"))
PLATE_IOU_THRESHOLD = 0.8
CHARACTER_IOU_THRESHOLD = 0.5


def iou(a: BoundingBox, b: BoundingBox) -> float:
    return a.iou(b)


def _check_keys(predictions: Mapping, truths: Mapping):
    missing = set(truths) - set(predictions)
    extra = set(predictions) - set(truths)
    if missing or extra:
        raise KeyingError(f"image ids differ: {len(missing)} without "
                          f"prediction, {len(extra)} without ground truth "
                          f"(e.g. {sorted(missing | extra)[:3]})")


def _ratio(count: int, total: int) -> float:
    return count / total if total else 0.0


def plate_detection_accuracy(predictions: Mapping[str, Optional[BoundingBox]],
                             truths: Mapping[str, BoundingBox],
                             threshold: float = PLATE_IOU_THRESHOLD) \
        -> Tuple[int, float]:
    """
    A prediction is correct when its IoU with the ground truth is strictly
    greater than threshold. A missing plate (None) is incorrect.
    :return: (correct, accuracy)
    """
    _check_keys(predictions, truths)
    correct = sum(1 for key, truth in truths.items()
                  if predictions[key] is not None
                  and predictions[key].iou(truth) > threshold)
    return correct, _ratio(correct, len(truths))


def normalize_text(text: str) -> str:
    return "".join(text.split()).upper()


class ConfusionMatrix:
    """
    Counts of (ground truth, predicted) character pairs. A ground-truth
    character with no aligned prediction lands in the 'missed' column, an
    extra prediction in the 'missed' row.
    """

    def __init__(self, labels: Sequence[str] = CONFUSION_LABELS):
        self.labels = tuple(labels)
        self.index = {label: i for i, label in enumerate(self.labels)}
        self.counts = np.zeros((len(self.labels), len(self.labels)),
                               dtype=np.int64)

    def _position(self, label: Optional[str]) -> int:
        key = MISSED if label is None else label
        if key not in self.index:
            raise PreconditionError(f"'{key}' is not a plate character")
        return self.index[key]

    def add(self, truth: Optional[str], predicted: Optional[str]):
        self.counts[self._position(truth), self._position(predicted)] += 1

    def add_alignment(self, truth: str, predicted: str):
        for t, p in align_strings(truth, predicted):
            self.add(t, p)

    def count(self, truth: Optional[str], predicted: Optional[str]) -> int:
        return int(self.counts[self._position(truth),
                               self._position(predicted)])

    def row_sum(self, truth: Optional[str]) -> int:
        return int(self.counts[self._position(truth)].sum())

    def merge(self, other: "ConfusionMatrix"):
        self.counts += other.counts

    def to_dict(self) -> Dict[str, object]:
        return {"labels": list(self.labels), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, data) -> "ConfusionMatrix":
        matrix = cls(data["labels"])
        matrix.counts[:] = np.asarray(data["counts"], dtype=np.int64)
        return matrix


def align_strings(truth: str, predicted: str) \
        -> List[Tuple[Optional[str], Optional[str]]]:
    """
    Minimal unit-cost edit alignment. On ties the backtrace prefers a
    match or substitution, then a deletion, then an insertion.
    :return: (truth char or None, predicted char or None) pairs in order
    """
    n, m = len(truth), len(predicted)
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            substitution = cost[i - 1, j - 1] + \
                (truth[i - 1] != predicted[j - 1])
            cost[i, j] = min(substitution, cost[i - 1, j] + 1,
                             cost[i, j - 1] + 1)
    pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i, j] == cost[i - 1, j - 1] + \
                (truth[i - 1] != predicted[j - 1]):
            pairs.append((truth[i - 1], predicted[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] == cost[i - 1, j] + 1:
            pairs.append((truth[i - 1], None))
            i -= 1
        else:
            pairs.append((None, predicted[j - 1]))
            j -= 1
    return pairs[::-1]


class RecognitionScore(NamedTuple):
    correct: int
    accuracy: float
    confusion: ConfusionMatrix


def _reading_text(reading) -> str:
    if reading is None:
        return ""
    if isinstance(reading, PlateReading):
        return reading.text
    return str(reading)


def recognition_accuracy(readings: Mapping[str, object],
                         truths: Mapping[str, str]) -> RecognitionScore:
    """
    Exact full-string match rate, ignoring whitespace and case.
    :param readings: PlateReading, plain string or None per image id
    """
    _check_keys(readings, truths)
    confusion = ConfusionMatrix()
    correct = 0
    for key in sorted(truths):
        truth = normalize_text(truths[key])
        predicted = normalize_text(_reading_text(readings[key]))
        correct += truth == predicted
        confusion.add_alignment(truth, predicted)
    return RecognitionScore(correct, _ratio(correct, len(truths)), confusion)


def confusable_pairs(confusion: ConfusionMatrix,
                     pairs: Sequence[Tuple[str, str]] = CONFUSABLE_PAIRS) \
        -> Dict[str, int]:
    """ Both directions of each pair, keyed 'truth->predicted'. """
    result = {}
    for a, b in pairs:
        result[f"{a}->{b}"] = confusion.count(a, b)
        result[f"{b}->{a}"] = confusion.count(b, a)
    return result


class DetectionMetrics(NamedTuple):
    matched: int
    predicted: int
    truth: int

    @property
    def precision(self) -> float:
        return _ratio(self.matched, self.predicted)

    @property
    def recall(self) -> float:
        return _ratio(self.matched, self.truth)


def character_detection_metrics(
        readings: Mapping[str, Optional[PlateReading]],
        truths: Mapping[str, Sequence[Tuple[str, BoundingBox]]],
        threshold: float = CHARACTER_IOU_THRESHOLD) -> DetectionMetrics:
    """
    Greedy matching by descending score: a kept detection matches the
    unmatched ground-truth character of the same label with the highest
    IoU, provided that IoU is at least threshold.
    """
    _check_keys(readings, truths)
    matched = predicted = n_truth = 0
    for key in sorted(truths):
        chars = list(truths[key])
        n_truth += len(chars)
        reading = readings[key]
        if reading is None:
            continue
        free = [True] * len(chars)
        detections = sorted(reading.detections,
                            key=lambda d: (-d.score, d.box.x, d.label))
        predicted += len(detections)
        for detection in detections:
            best, best_iou = None, threshold
            for i, (label, box) in enumerate(chars):
                if not free[i] or label != detection.label:
                    continue
                overlap = detection.box.iou(box)
                if overlap >= best_iou:
                    best, best_iou = i, overlap
            if best is not None:
                free[best] = False
                matched += 1
    return DetectionMetrics(matched, predicted, n_truth)


@dataclass(frozen=True)
class LatencyStats:
    n: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    fps: float

    @classmethod
    def from_seconds(cls, samples: Sequence[float]) -> "LatencyStats":
        ms = np.asarray(samples, dtype=np.float64) * 1000.0
        mean = float(ms.sum() / len(ms))
        return cls(len(ms), mean, float(np.percentile(ms, 50)),
                   float(np.percentile(ms, 95)),
                   1000.0 / mean if mean > 0 else float("inf"))

    def to_dict(self):
        return asdict(self)


def _timed(fn: Callable, item) -> Tuple[float, object]:
    start = time.perf_counter()
    output = fn(item)
    return time.perf_counter() - start, output


def timing_benchmark(fn: Callable, images: Sequence, warmup: int = 1,
                     reps: int = 1, executor=None) \
        -> Tuple[LatencyStats, List[object]]:
    """
    Wall-clock latency of fn per image, measured reps times over every image
    after warmup untimed calls. An executor runs images concurrently; each
    latency is still measured around a single call.
    :return: (stats, outputs of the last repetition in image order)
    """
    if reps < 1:
        raise PreconditionError(f"reps must be at least 1, got {reps}")
    if not images:
        raise PreconditionError("no images to benchmark")
    for i in range(max(0, warmup)):
        fn(images[i % len(images)])
    samples, outputs = [], []
    for _ in range(reps):
        if executor is None:
            timed = [_timed(fn, image) for image in images]
        else:
            timed = list(executor.map(lambda image: _timed(fn, image),
                                      images))
        samples.extend(seconds for seconds, _ in timed)
        outputs = [output for _, output in timed]
    stats = LatencyStats.from_seconds(samples)
    logger.info("%d timed calls: mean %.2f ms, p50 %.2f ms, p95 %.2f ms",
                stats.n, stats.mean_ms, stats.p50_ms, stats.p95_ms)
    return stats, outputs


class EvalReport(_BaseModel):
    def __init__(self,
                 group: str,
                 n_images: int,
                 plate_detect_correct: int,
                 recog_correct: int,
                 confusion: ConfusionMatrix,
                 character_metrics: DetectionMetrics,
                 latency: Optional[LatencyStats] = None):
        """
        Metrics of one group of images.
        :param group: 'all' or the value of the grouping field ('nir', 'rgb')
        """
        self.group = group
        self.n_images = n_images
        self.plate_detect_correct = plate_detect_correct
        self.recog_correct = recog_correct
        self.confusion = confusion
        self.character_metrics = character_metrics
        self.latency = latency

    @property
    def plate_detect_accuracy(self) -> float:
        return _ratio(self.plate_detect_correct, self.n_images)

    @property
    def recog_accuracy(self) -> float:
        return _ratio(self.recog_correct, self.n_images)

    @property
    def confusable(self) -> Dict[str, int]:
        return confusable_pairs(self.confusion)

    @classmethod
    def _create_instance_from_json(cls, item_data: Dict[str, object]):
        latency = item_data.get("latency")
        chars = item_data["characters"]
        return cls(group=item_data["group"],
                   n_images=item_data["n_images"],
                   plate_detect_correct=item_data["plate_detect_correct"],
                   recog_correct=item_data["recog_correct"],
                   confusion=ConfusionMatrix.from_dict(item_data["confusion"]),
                   character_metrics=DetectionMetrics(
                       chars["matched"], chars["predicted"], chars["truth"]),
                   latency=None if latency is None else LatencyStats(**latency))

    def _prepare_data_to_save(self) -> Dict[str, object]:
        chars = self.character_metrics
        return {"group": self.group,
                "n_images": self.n_images,
                "plate_detect_correct": self.plate_detect_correct,
                "plate_detect_accuracy": self.plate_detect_accuracy,
                "recog_correct": self.recog_correct,
                "recog_accuracy": self.recog_accuracy,
                "characters": {"matched": chars.matched,
                               "predicted": chars.predicted,
                               "truth": chars.truth,
                               "precision": chars.precision,
                               "recall": chars.recall},
                "confusable": self.confusable,
                "confusion": self.confusion.to_dict(),
                "latency": None if self.latency is None
                else self.latency.to_dict()}


def evaluate(readings: Mapping[str, Optional[PlateReading]],
             records: Sequence[SynthRecord], group: str = "all",
             plate_threshold: float = PLATE_IOU_THRESHOLD,
             latency: Optional[LatencyStats] = None) -> EvalReport:
    """ Score readings against the ground truth of manifest records. """
    by_id = {record.record_id: record for record in records}
    _check_keys(readings, by_id)
    plate_correct, _ = plate_detection_accuracy(
        {key: None if reading is None else reading.plate_box
         for key, reading in readings.items()},
        {key: record.plate_box for key, record in by_id.items()},
        plate_threshold)
    recognition = recognition_accuracy(
        readings, {key: record.text for key, record in by_id.items()})
    characters = character_detection_metrics(
        readings, {key: record.chars for key, record in by_id.items()})
    return EvalReport(group, len(by_id), plate_correct, recognition.correct,
                      recognition.confusion, characters, latency)


def evaluate_groups(readings: Mapping[str, Optional[PlateReading]],
                    records: Sequence[SynthRecord],
                    group_by: Optional[str] = None,
                    plate_threshold: float = PLATE_IOU_THRESHOLD) \
        -> List[EvalReport]:
    """
    The 'all' report first, then one report per value of the record field
    group_by (e.g. 'spectrum'), sorted by value.
    """
    reports = [evaluate(readings, records, "all", plate_threshold)]
    if group_by is None:
        return reports
    groups: Dict[str, List[SynthRecord]] = {}
    for record in records:
        groups.setdefault(str(getattr(record, group_by)), []).append(record)
    for value in sorted(groups):
        members = groups[value]
        reports.append(evaluate({r.record_id: readings[r.record_id]
                                 for r in members}, members, value,
                                plate_threshold))
    return reports
