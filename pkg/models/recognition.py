"""
Plate string assembly from character detections: order by center,
suppress overlapping duplicates, enforce the digit positions.
"""
import logging
from dataclasses import dataclass, asdict
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from models.base_model import _BaseModel
from models.exceptions import ParameterError, PreconditionError
from models.image_buffer import BoundingBox, ImageBuffer, crop
from models.inference import detect_characters
from models.localizer import PlateLocalizer
from models.part_model import CharacterMixtureSet, Detection

logger = logging.getLogger(__name__)

OVERLAP_SUPPRESSED = "overlap-suppressed"
DIGIT_RULE_IGNORED = "digit-rule-ignored"
BELOW_THRESHOLD = "below-threshold"
OVERLAP_MODES = ("min-area", "iou")


@dataclass(frozen=True)
class RecognitionConfig:
    """ threshold and reject_margin default to the model's detector config. """
    threshold: Optional[float] = None
    overlap_ratio: float = 0.7
    overlap_mode: str = "min-area"
    reject_margin: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.overlap_ratio <= 1.0:
            raise ParameterError(f"overlap ratio must lie in (0, 1], got "
                                 f"{self.overlap_ratio}")
        if self.overlap_mode not in OVERLAP_MODES:
            raise ParameterError(f"overlap mode must be one of "
                                 f"{OVERLAP_MODES}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Rejection:
    detection: Detection
    reason: str

    def to_json(self):
        data = self.detection.to_json()
        data["reason"] = self.reason
        return data

    @classmethod
    def from_json(cls, data):
        return cls(Detection.from_json(data), data["reason"])


class DigitRuleResult(NamedTuple):
    detections: List[Detection]
    ignored: List[Detection]
    satisfied: bool


class PlateReading(_BaseModel):
    def __init__(self,
                 image_id: str,
                 plate_box: Optional[BoundingBox],
                 detections: Sequence[Detection],
                 rejected: Sequence[Rejection] = (),
                 valid: bool = True):
        """
        Recognition result of one image.
        :param plate_box: None when no plate was localized
        :param detections: kept detections, left to right
        :param valid: False when the digit rule could not be satisfied
        """
        self.image_id = image_id
        self.plate_box = plate_box
        self.detections = list(detections)
        self.rejected = list(rejected)
        self.valid = valid

    @classmethod
    def no_plate(cls, image_id: str) -> "PlateReading":
        return cls(image_id, None, [], [], valid=False)

    @property
    def text(self) -> str:
        return "".join(d.label for d in self.detections)

    @property
    def scores(self) -> List[float]:
        return [d.score for d in self.detections]

    @property
    def min_score(self) -> Optional[float]:
        return min(self.scores) if self.detections else None

    @property
    def found(self) -> bool:
        return self.plate_box is not None

    @classmethod
    def _create_instance_from_json(cls, item_data: Dict[str, object]):
        box = item_data.get("plate_box")
        return cls(image_id=item_data["id"],
                   plate_box=None if box is None
                   else BoundingBox.from_list(box),
                   detections=[Detection.from_json(d)
                               for d in item_data["detections"]],
                   rejected=[Rejection.from_json(r)
                             for r in item_data["rejected"]],
                   valid=item_data["valid"])

    def _prepare_data_to_save(self) -> Dict[str, object]:
        return {"id": self.image_id,
                "plate_box": None if self.plate_box is None
                else self.plate_box.to_list(),
                "text": self.text,
                "valid": self.valid,
                "min_score": None if self.min_score is None
                else round(self.min_score, 6),
                "detections": [d.to_json() for d in self.detections],
                "rejected": [r.to_json() for r in self.rejected]}


def _center_key(detection: Detection):
    cx, cy = detection.box.center
    return (cx, cy, -detection.score, detection.label, detection.box.w,
            detection.box.h)


def order_by_center(detections: Sequence[Detection]) -> List[Detection]:
    """ Left to right by box center, then center y, then score descending. """
    return sorted(detections, key=_center_key)


def overlap(a: BoundingBox, b: BoundingBox, mode: str = "min-area") -> float:
    return a.overlap_min_ratio(b) if mode == "min-area" else a.iou(b)


def split_overlaps(detections: Sequence[Detection], ratio: float = 0.7,
                   mode: str = "min-area") \
        -> Tuple[List[Detection], List[Detection]]:
    """
    Greedy by descending score: a detection is kept when its overlap with
    every kept detection is at most ratio.
    :return: (kept in input order, suppressed)
    """
    if not 0.0 < ratio <= 1.0:
        raise PreconditionError(f"overlap ratio must lie in (0, 1], got "
                                f"{ratio}")
    by_score = sorted(range(len(detections)),
                      key=lambda i: (-detections[i].score,
                                     _center_key(detections[i])))
    kept_index, suppressed = [], []
    for i in by_score:
        candidate = detections[i]
        if all(overlap(candidate.box, detections[j].box, mode) <= ratio
               for j in kept_index):
            kept_index.append(i)
        else:
            suppressed.append(candidate)
    return [detections[i] for i in sorted(kept_index)], suppressed


def suppress_overlaps(detections: Sequence[Detection], ratio: float = 0.7,
                      mode: str = "min-area") -> List[Detection]:
    return split_overlaps(detections, ratio, mode)[0]


def _trim_leading_letters(detections: List[Detection]) \
        -> Tuple[List[Detection], List[Detection], bool]:
    digits_seen = 0
    for i, detection in enumerate(detections):
        if detection.is_digit:
            digits_seen += 1
            if digits_seen == 2:
                head = detections[:i + 1]
                return ([d for d in head if d.is_digit] + detections[i + 1:],
                        [d for d in head if not d.is_digit], True)
    return list(detections), [], False


def enforce_digit_positions(detections: Sequence[Detection]) \
        -> DigitRuleResult:
    """
    Drop letters from each end until the first two and the last two
    characters are digits. An end without two digits drops nothing and
    marks the result unsatisfied.
    """
    kept, ignored_left, left_ok = _trim_leading_letters(list(detections))
    reversed_kept, ignored_right, right_ok = \
        _trim_leading_letters(kept[::-1])
    return DigitRuleResult(reversed_kept[::-1],
                           ignored_left + ignored_right[::-1],
                           left_ok and right_ok)


def _shift(detection: Detection, dx: int, dy: int) -> Detection:
    box = detection.box
    return Detection(BoundingBox(box.x + dx, box.y + dy, box.w, box.h),
                     detection.label, detection.score)


def recognize_plate(plate: ImageBuffer, models: CharacterMixtureSet,
                    threshold: Optional[float] = None,
                    config: RecognitionConfig = RecognitionConfig(),
                    image_id: str = "",
                    plate_box: Optional[BoundingBox] = None) -> PlateReading:
    """
    detect -> order by center -> suppress overlaps -> digit rule.
    Detections scoring within reject_margin under the threshold are
    reported as below-threshold rejections. Boxes are shifted by plate_box
    into image coordinates when it is given.
    """
    detector = models.detector_config
    if threshold is None:
        threshold = config.threshold if config.threshold is not None \
            else detector.threshold
    margin = config.reject_margin if config.reject_margin is not None \
        else detector.reject_margin
    candidates = detect_characters(models, plate, threshold - margin)
    if plate_box is not None:
        candidates = [_shift(d, plate_box.x, plate_box.y) for d in candidates]
    else:
        plate_box = BoundingBox(0, 0, plate.width, plate.height)
    above = [d for d in candidates if d.score > threshold]
    rejected = [Rejection(d, BELOW_THRESHOLD) for d in
                order_by_center(d for d in candidates if d.score <= threshold)]

    ordered = order_by_center(above)
    kept, suppressed = split_overlaps(ordered, config.overlap_ratio,
                                      config.overlap_mode)
    rejected.extend(Rejection(d, OVERLAP_SUPPRESSED)
                    for d in order_by_center(suppressed))
    result = enforce_digit_positions(kept)
    rejected.extend(Rejection(d, DIGIT_RULE_IGNORED) for d in result.ignored)
    reading = PlateReading(image_id, plate_box, result.detections, rejected,
                           valid=result.satisfied)
    logger.debug("%s: '%s' valid=%s, %d rejected", image_id or "plate",
                 reading.text, reading.valid, len(rejected))
    return reading


def recognize_image(img: ImageBuffer, localizer: PlateLocalizer,
                    models: CharacterMixtureSet,
                    threshold: Optional[float] = None,
                    config: RecognitionConfig = RecognitionConfig(),
                    image_id: str = "") -> Optional[PlateReading]:
    """ Localize, crop and recognize; None when no plate is found. """
    box = localizer.localize(img, image_id)
    if box is None:
        return None
    return recognize_plate(crop(img, box), models, threshold, config,
                           image_id, plate_box=box)
