"""
Synthetic plate generator: plate strings, dot-matrix rendering, seeded
augmentation and annotated dataset export.
"""
import itertools
import json
import logging
import math
import os.path
from dataclasses import dataclass, asdict, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from scipy import ndimage

from models.base_model import _BaseModel
from models.exceptions import FontError, ParameterError, PreconditionError
from models.image_buffer import (BoundingBox, ImageBuffer, nir_to_three_channel,
                                 paste, save_png)
from models.part_model import DIGITS, LETTERS

logger = logging.getLogger(__name__)

DEFAULT_FONT_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                                 "..", "data", "plate_font.json")
SPECTRA = ("RGB", "NIR")
PROGRESS_EVERY = 500


@dataclass(frozen=True)
class PlateGroup:
    kind: str
    min_len: int
    max_len: int

    @property
    def characters(self) -> str:
        return DIGITS if self.kind == "digits" else LETTERS


@dataclass(frozen=True)
class PlateFormat:
    """
    Ordered character groups. The first group must be two digits and the
    last two to four digits, so any plate starts and ends with two digits.
    """
    groups: Tuple[PlateGroup, ...] = (PlateGroup("digits", 2, 2),
                                      PlateGroup("letters", 1, 3),
                                      PlateGroup("digits", 2, 4))
    min_length: int = 7
    max_length: int = 8

    def __post_init__(self):
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise ParameterError("a plate format needs at least one group")
        for group in groups:
            if group.kind not in ("digits", "letters"):
                raise ParameterError(f"unknown group kind {group.kind}")
            if not 1 <= group.min_len <= group.max_len:
                raise ParameterError(f"bad group length range {group}")
        first, last = groups[0], groups[-1]
        if first.kind != "digits" or first.min_len != 2 or first.max_len != 2:
            raise ParameterError("the first group must be exactly 2 digits")
        if last.kind != "digits" or last.min_len < 2 or last.max_len > 4:
            raise ParameterError("the last group must be 2 to 4 digits")
        if not self.lengths():
            raise ParameterError(f"no group lengths give a plate of "
                                 f"{self.min_length} to {self.max_length}")

    def lengths(self) -> List[Tuple[int, ...]]:
        """ Every per-group length combination allowed by the total. """
        ranges = [range(g.min_len, g.max_len + 1) for g in self.groups]
        return [combo for combo in itertools.product(*ranges)
                if self.min_length <= sum(combo) <= self.max_length]

    def matches(self, text: str) -> bool:
        for combo in self.lengths():
            if sum(combo) != len(text):
                continue
            start, ok = 0, True
            for group, length in zip(self.groups, combo):
                chunk = text[start:start + length]
                ok = ok and all(c in group.characters for c in chunk)
                start += length
            if ok:
                return True
        return False

    def to_dict(self):
        return {"groups": [asdict(g) for g in self.groups],
                "min_length": self.min_length, "max_length": self.max_length}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(PlateGroup(**g) for g in data["groups"]),
                   data["min_length"], data["max_length"])


@dataclass(frozen=True)
class RenderStyle:
    spectrum: str = "RGB"
    font_id: str = "dot-matrix-5x7"
    char_height: int = 32
    gap: int = 4
    margin: int = 13
    group_gap: int = 8
    glyph_aspect: float = 0.5
    background: Tuple[float, float, float] = (0.95, 0.95, 0.9)
    foreground: Tuple[float, float, float] = (0.1, 0.1, 0.1)

    def __post_init__(self):
        if self.spectrum not in SPECTRA:
            raise ParameterError(f"spectrum must be one of {SPECTRA}")
        if self.char_height < 16:
            raise ParameterError(f"char height {self.char_height} < 16 px")
        object.__setattr__(self, "background", tuple(self.background))
        object.__setattr__(self, "foreground", tuple(self.foreground))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


class PlateFont:
    """ Bitmap glyph set loaded from a JSON style asset. """
    def __init__(self, name: str, glyphs: Dict[str, np.ndarray]):
        self.name = name
        self.glyphs = glyphs

    @classmethod
    def load(cls, path: str = DEFAULT_FONT_PATH) -> "PlateFont":
        with open(path, 'r', encoding='utf-8') as file:
            data = json.load(file)
        ink = data.get("ink", "#")
        glyphs = {}
        for label, rows in data["glyphs"].items():
            bitmap = np.array([[c == ink for c in row] for row in rows])
            if bitmap.shape != (data["height"], data["width"]):
                raise FontError(f"glyph '{label}' is not "
                                f"{data['width']}x{data['height']}")
            glyphs[label] = bitmap
        return cls(data["name"], glyphs)

    def glyph(self, label: str) -> np.ndarray:
        try:
            return self.glyphs[label]
        except KeyError:
            raise FontError(f"font '{self.name}' has no glyph for "
                            f"'{label}'") from None

    def coverage(self, label: str, width: int, height: int) -> np.ndarray:
        """ Anti-aliased ink coverage of a glyph scaled to width x height. """
        bitmap = self.glyph(label)
        rows, cols = bitmap.shape
        image = Image.fromarray(np.where(bitmap, 255, 0).astype(np.uint8))
        factor = 8
        image = image.resize((cols * factor, rows * factor),
                             Image.Resampling.NEAREST)
        image = image.resize((width, height), Image.Resampling.BOX)
        return np.asarray(image, dtype=np.float64) / 255.0


_FONTS: Dict[str, PlateFont] = {}


def default_font() -> PlateFont:
    if "default" not in _FONTS:
        _FONTS["default"] = PlateFont.load()
    return _FONTS["default"]


@dataclass(frozen=True)
class AugmentConfig:
    max_blur: float = 1.5
    max_noise: float = 0.05
    brightness: float = 0.2
    contrast: float = 0.2
    rotation_deg: float = 3.0
    perspective: float = 0.02

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    @classmethod
    def none(cls) -> "AugmentConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class AugmentParams:
    """
    One draw of augmentation magnitudes. corners holds the (dx, dy) pixel
    offsets of the four image corners, clockwise from top-left.
    """
    blur: float = 0.0
    noise: float = 0.0
    noise_seed: int = 0
    brightness: float = 0.0
    contrast: float = 0.0
    rotation_deg: float = 0.0
    corners: Tuple[Tuple[float, float], ...] = field(
        default=((0.0, 0.0),) * 4)

    @property
    def is_geometric(self) -> bool:
        return self.rotation_deg != 0.0 or any(
            dx != 0.0 or dy != 0.0 for dx, dy in self.corners)

    def to_dict(self):
        data = asdict(self)
        data["corners"] = [list(c) for c in self.corners]
        return data


def sample_augment(rng: np.random.Generator, config: AugmentConfig,
                   dims: Tuple[int, int]) -> AugmentParams:
    width, _ = dims
    corners = rng.uniform(-1.0, 1.0, size=(4, 2)) * config.perspective * width
    return AugmentParams(
        blur=float(rng.uniform(0.0, config.max_blur)),
        noise=float(rng.uniform(0.0, config.max_noise)),
        noise_seed=int(rng.integers(2 ** 31)),
        brightness=float(rng.uniform(-config.brightness, config.brightness)),
        contrast=float(rng.uniform(-config.contrast, config.contrast)),
        rotation_deg=float(rng.uniform(-config.rotation_deg,
                                       config.rotation_deg)),
        corners=tuple((float(dx), float(dy)) for dx, dy in corners))


def _source_coordinates(params: AugmentParams, xs: np.ndarray,
                        ys: np.ndarray, dims: Tuple[int, int]) \
        -> Tuple[np.ndarray, np.ndarray]:
    """ Inverse warp: where an output pixel samples the input image. """
    width, height = dims
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    theta = math.radians(params.rotation_deg)
    cos, sin = math.cos(theta), math.sin(theta)
    rx = cos * (xs - cx) + sin * (ys - cy) + cx
    ry = -sin * (xs - cx) + cos * (ys - cy) + cy
    u = np.clip(xs / max(width - 1, 1), 0.0, 1.0)
    v = np.clip(ys / max(height - 1, 1), 0.0, 1.0)
    (tlx, tly), (trx, try_), (brx, bry), (blx, bly) = params.corners
    ox = (1 - u) * (1 - v) * tlx + u * (1 - v) * trx + u * v * brx \
        + (1 - u) * v * blx
    oy = (1 - u) * (1 - v) * tly + u * (1 - v) * try_ + u * v * bry \
        + (1 - u) * v * bly
    return rx + ox, ry + oy


def apply_augment(img: ImageBuffer, params: AugmentParams) -> ImageBuffer:
    """ Warp, photometric jitter, blur, then noise; each skipped at 0. """
    pixels = img.pixels
    dims = (img.width, img.height)
    if params.is_geometric:
        ys, xs = np.mgrid[0:img.height, 0:img.width].astype(np.float64)
        sx, sy = _source_coordinates(params, xs, ys, dims)
        pixels = np.stack([ndimage.map_coordinates(pixels[:, :, c], [sy, sx],
                                                   order=1, mode='nearest')
                           for c in range(img.channels)], axis=2)
    if params.brightness != 0.0 or params.contrast != 0.0:
        mean = float(pixels.mean())
        pixels = (pixels - mean) * (1.0 + params.contrast) \
            + mean * (1.0 + params.brightness)
    if params.blur > 0.0:
        pixels = ndimage.gaussian_filter(pixels,
                                         sigma=(params.blur, params.blur, 0))
    if params.noise > 0.0:
        noise_rng = np.random.default_rng(params.noise_seed)
        # one noise plane shared by all channels
        pixels = pixels + noise_rng.normal(0.0, params.noise,
                                           size=(img.height, img.width, 1))
    if pixels is img.pixels:
        return img
    return ImageBuffer(np.clip(pixels, 0.0, 1.0))


def separate_boxes(boxes: Sequence[BoundingBox]) -> List[BoundingBox]:
    """
    Clip left-to-right boxes so neighbours do not overlap: an overlapping
    pair is cut at the middle of its horizontal overlap. Cuts never move
    left of the previous one, so non-adjacent boxes stay disjoint too.
    """
    x1 = [box.x for box in boxes]
    x2 = [box.x2 for box in boxes]
    for i in range(len(boxes) - 1):
        if x2[i] <= x1[i + 1]:
            continue
        cut = max((x2[i] + x1[i + 1]) // 2, x1[i] + 1)
        x2[i] = cut
        x1[i + 1] = max(x1[i + 1], cut)
        x2[i + 1] = max(x2[i + 1], x1[i + 1] + 1)
    return [BoundingBox(left, box.y, right - left, box.h)
            for box, left, right in zip(boxes, x1, x2)]


def transform_boxes(boxes: Sequence[BoundingBox], params: AugmentParams,
                    dims: Tuple[int, int]) -> List[BoundingBox]:
    """
    Map boxes through the augmentation warp: every corner is pushed forward
    by inverting the sampling map with a few fixed-point steps, the box
    becomes the clipped hull of the four corners, and neighbouring hulls
    are separated with separate_boxes.
    """
    if not params.is_geometric:
        return list(boxes)
    width, height = dims
    result = []
    for box in boxes:
        px = np.array([box.x, box.x2, box.x2, box.x], dtype=np.float64)
        py = np.array([box.y, box.y, box.y2, box.y2], dtype=np.float64)
        qx, qy = px.copy(), py.copy()
        for _ in range(8):
            sx, sy = _source_coordinates(params, qx, qy, dims)
            qx, qy = qx - (sx - px), qy - (sy - py)
        result.append(BoundingBox.from_corners(qx.min(), qy.min(), qx.max(),
                                               qy.max(), width, height))
    return separate_boxes(result)


def augment(img: ImageBuffer, rng: np.random.Generator,
            config: AugmentConfig = AugmentConfig()) -> ImageBuffer:
    return apply_augment(img, sample_augment(rng, config,
                                             (img.width, img.height)))


def generate_plate_string(plate_format: PlateFormat,
                          rng: np.random.Generator) -> str:
    lengths = plate_format.lengths()
    combo = lengths[int(rng.integers(len(lengths)))]
    text = []
    for group, length in zip(plate_format.groups, combo):
        alphabet = group.characters
        text.extend(alphabet[i] for i in rng.integers(len(alphabet),
                                                      size=length))
    return "".join(text)


def sample_style(rng: np.random.Generator, spectrum: str) -> RenderStyle:
    char_height = int(rng.integers(24, 49))
    gap = int(round(char_height * rng.uniform(0.08, 0.18)))
    margin = int(round(char_height * rng.uniform(0.35, 0.5)))
    group_gap = int(round(char_height * rng.uniform(0.2, 0.5)))
    if spectrum == "NIR":
        grey_bg = float(rng.uniform(0.6, 0.95))
        grey_fg = float(rng.uniform(0.0, 0.3))
        background, foreground = (grey_bg,) * 3, (grey_fg,) * 3
    else:
        background = tuple(float(v) for v in
                           rng.uniform((0.75, 0.75, 0.6), (1.0, 1.0, 1.0)))
        foreground = tuple(float(v) for v in rng.uniform(0.0, 0.25, size=3))
    return RenderStyle(spectrum=spectrum, char_height=char_height, gap=gap,
                       margin=margin, group_gap=group_gap,
                       background=background, foreground=foreground)


def render_plate(text: str, style: RenderStyle,
                 rng: Optional[np.random.Generator] = None,
                 font: Optional[PlateFont] = None) \
        -> Tuple[ImageBuffer, List[BoundingBox]]:
    """
    Rasterize text left to right with an extra gap between digit and letter
    groups. NIR plates are drawn on one channel and channel-cloned.
    :return: (plate image, tight box of every glyph in text order)
    """
    if not text:
        raise PreconditionError("cannot render an empty plate")
    font = font if font is not None else default_font()
    height = style.char_height
    width = max(3, int(round(height * style.glyph_aspect)))
    coverages = [font.coverage(label, width, height) for label in text]

    offsets, cursor = [], style.margin
    for i, label in enumerate(text):
        if i > 0:
            cursor += style.gap
            if (label in DIGITS) != (text[i - 1] in DIGITS):
                cursor += style.group_gap
        offsets.append(cursor)
        cursor += width
    plate_w, plate_h = cursor + style.margin, height + 2 * style.margin

    ink = np.zeros((plate_h, plate_w), dtype=np.float64)
    boxes = []
    for x, coverage in zip(offsets, coverages):
        y = style.margin
        ink[y:y + height, x:x + width] = coverage
        rows = np.nonzero(coverage.any(axis=1))[0]
        cols = np.nonzero(coverage.any(axis=0))[0]
        boxes.append(BoundingBox(x + int(cols[0]), y + int(rows[0]),
                                 int(cols[-1] - cols[0] + 1),
                                 int(rows[-1] - rows[0] + 1)))

    if style.spectrum == "NIR":
        level = style.background[0] + ink * (style.foreground[0]
                                             - style.background[0])
        plate = ImageBuffer(np.clip(level, 0.0, 1.0))
        return nir_to_three_channel(plate), boxes
    background = np.array(style.background)
    foreground = np.array(style.foreground)
    pixels = background + ink[:, :, np.newaxis] * (foreground - background)
    return ImageBuffer(np.clip(pixels, 0.0, 1.0)), boxes


def compose_scene(plate: ImageBuffer, boxes: Sequence[BoundingBox],
                  rng: np.random.Generator, scene_size: Tuple[int, int]) \
        -> Tuple[ImageBuffer, BoundingBox, List[BoundingBox]]:
    """ Paste a plate at a random spot of a smooth textured background. """
    width, height = scene_size
    if plate.width > width or plate.height > height:
        raise PreconditionError(f"{plate.width}x{plate.height} plate does not "
                                f"fit a {width}x{height} scene")
    texture = ndimage.gaussian_filter(rng.normal(size=(height, width)), 12.0)
    span = float(texture.max() - texture.min()) or 1.0
    texture = 0.25 + 0.3 * (texture - texture.min()) / span
    background = ImageBuffer(np.repeat(texture[:, :, np.newaxis],
                                       plate.channels, axis=2))
    x = int(rng.integers(0, width - plate.width + 1))
    y = int(rng.integers(0, height - plate.height + 1))
    scene = paste(background, plate, x, y)
    plate_box = BoundingBox(x, y, plate.width, plate.height)
    shifted = [BoundingBox(b.x + x, b.y + y, b.w, b.h) for b in boxes]
    return scene, plate_box, shifted


class SynthRecord(_BaseModel):
    def __init__(self,
                 record_id: str,
                 image: str,
                 text: str,
                 plate_box: BoundingBox,
                 chars: List[Tuple[str, BoundingBox]],
                 spectrum: str,
                 split: str,
                 seed: int):
        """
        One annotated synthetic image.
        :param image: path relative to the manifest directory
        :param plate_box: plate region in image pixels
        :param chars: (label, box) per character, left to right
        """
        self.record_id = record_id
        self.image = image
        self.text = text
        self.plate_box = plate_box
        self.chars = list(chars)
        self.spectrum = spectrum
        self.split = split
        self.seed = seed

    @classmethod
    def _create_instance_from_json(cls, item_data: Dict[str, object]):
        return cls(record_id=item_data["id"],
                   image=item_data["image"],
                   text=item_data["text"],
                   plate_box=BoundingBox.from_list(item_data["plate_box"]),
                   chars=[(c["label"], BoundingBox.from_list(c["box"]))
                          for c in item_data["chars"]],
                   spectrum=item_data["spectrum"],
                   split=item_data["split"],
                   seed=item_data["seed"])

    def _prepare_data_to_save(self) -> Dict[str, object]:
        return {"id": self.record_id,
                "image": self.image,
                "text": self.text,
                "plate_box": self.plate_box.to_list(),
                "chars": [{"label": label, "box": box.to_list()}
                          for label, box in self.chars],
                "spectrum": self.spectrum,
                "split": self.split,
                "seed": self.seed}

    def image_path(self, root: str) -> str:
        return os.path.join(root, self.image)


@dataclass(frozen=True)
class DatasetSpec:
    """ Everything generate_dataset needs besides the output directory. """
    n: int
    split: Tuple[float, float] = (0.8, 0.2)
    style_mix: float = 0.5
    seed: int = 0
    plate_format: PlateFormat = PlateFormat()
    augment: AugmentConfig = AugmentConfig()
    scene_size: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if self.n < 1:
            raise PreconditionError(f"n must be at least 1, got {self.n}")
        if any(f < 0.0 for f in self.split) \
                or abs(sum(self.split) - 1.0) > 1e-9:
            raise PreconditionError(f"split fractions {self.split} must be "
                                    f"non-negative and sum to 1")
        if not 0.0 <= self.style_mix <= 1.0:
            raise PreconditionError("style mix must lie in [0, 1]")


def _assignments(spec: DatasetSpec) -> Tuple[List[str], List[str]]:
    rng = np.random.default_rng(spec.seed)
    n_train = int(round(spec.n * spec.split[0]))
    n_nir = int(round(spec.n * spec.style_mix))
    split, spectra = ["val"] * spec.n, ["RGB"] * spec.n
    for i in rng.permutation(spec.n)[:n_train]:
        split[i] = "train"
    for i in rng.permutation(spec.n)[:n_nir]:
        spectra[i] = "NIR"
    return split, spectra


def synthesize_record(index: int, spec: DatasetSpec, split: str,
                      spectrum: str) \
        -> Tuple[ImageBuffer, SynthRecord]:
    """ Record index is a pure function of (spec.seed, index). """
    rng = np.random.default_rng([spec.seed, index])
    text = generate_plate_string(spec.plate_format, rng)
    style = sample_style(rng, spectrum)
    plate, boxes = render_plate(text, style, rng)
    params = sample_augment(rng, spec.augment, (plate.width, plate.height))
    plate = apply_augment(plate, params)
    boxes = transform_boxes(boxes, params, (plate.width, plate.height))
    if spec.scene_size is not None:
        image, plate_box, boxes = compose_scene(plate, boxes, rng,
                                                spec.scene_size)
    else:
        image, plate_box = plate, BoundingBox(0, 0, plate.width,
                                              plate.height)
    record_id = SynthRecord.generate_record_id(index)
    record = SynthRecord(record_id=record_id,
                         image=f"images/{record_id}.png",
                         text=text,
                         plate_box=plate_box,
                         chars=list(zip(text, boxes)),
                         spectrum=spectrum,
                         split=split,
                         seed=spec.seed)
    return image, record


def generate_dataset(spec: DatasetSpec, out_dir: str, executor=None) \
        -> Tuple[str, List[SynthRecord]]:
    """
    Write images/NNNNNN.png plus manifest.jsonl under out_dir.
    :param executor: optional concurrent.futures executor for the records
    :return: (manifest path, records ordered by index)
    """
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    split, spectra = _assignments(spec)

    def build(index):
        image, record = synthesize_record(index, spec, split[index],
                                          spectra[index])
        save_png(image, record.image_path(out_dir))
        if (index + 1) % PROGRESS_EVERY == 0:
            logger.info("generated %d / %d plates", index + 1, spec.n)
        return record

    indices = range(spec.n)
    if executor is None:
        records = [build(i) for i in indices]
    else:
        records = list(executor.map(build, indices))
    manifest = os.path.join(out_dir, "manifest.jsonl")
    SynthRecord.write_jsonl(manifest, records,
                            seed=spec.seed, n=spec.n,
                            split=list(spec.split),
                            style_mix=spec.style_mix,
                            plate_format=spec.plate_format.to_dict(),
                            augment=spec.augment.to_dict(),
                            font=default_font().name,
                            scene_size=None if spec.scene_size is None
                            else list(spec.scene_size))
    logger.info("%d train / %d val plates written to %s",
                split.count("train"), split.count("val"), manifest)
    return manifest, records


def read_manifest(path: str) -> Tuple[Dict[str, object], List[SynthRecord]]:
    return SynthRecord.read_jsonl(path)
