import io
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from models.exceptions import (BoundsError, DecodeError, FormatError,
                               PreconditionError)

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ImageBuffer:
    """
    Immutable raster image, 1 or 3 channels, float64 values in [0, 1].
    Pixels are stored row-major as a (height, width, channels) array that is
    flagged read-only, so a buffer can be shared across threads.
    """
    def __init__(self, pixels: np.ndarray):
        """
        :param pixels: (height, width, channels) or (height, width) array
        """
        array = np.array(pixels, dtype=np.float64)
        if array.ndim == 2:
            array = array[:, :, np.newaxis]
        if array.ndim != 3:
            raise FormatError(f"expected a 2-D or 3-D pixel array, got "
                              f"{array.ndim} dimensions")
        height, width, channels = array.shape
        if channels not in (1, 3):
            raise FormatError(f"unsupported channel count {channels}")
        if width <= 0 or height <= 0:
            raise PreconditionError("image dimensions must be positive")
        if not np.all(np.isfinite(array)) or array.min() < 0.0 \
                or array.max() > 1.0:
            raise PreconditionError("pixel values must lie in [0, 1]")
        array.setflags(write=False)
        self._pixels = array

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    @property
    def channels(self) -> int:
        return self._pixels.shape[2]

    def plane(self, channel: int = 0) -> np.ndarray:
        return self._pixels[:, :, channel]

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return np.array_equal(self._pixels, other._pixels)

    def __repr__(self):
        return (f"ImageBuffer(width={self.width}, height={self.height}, "
                f"channels={self.channels})")


@dataclass(frozen=True)
class BoundingBox:
    """ Axis-aligned box in pixels, (x, y) is the top-left corner. """
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise PreconditionError(f"box size must be positive: {self}")
        if self.x < 0 or self.y < 0:
            raise PreconditionError(f"box origin must be non-negative: "
                                    f"{self}")

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def center(self) -> Tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def intersection(self, other: "BoundingBox") -> int:
        iw = min(self.x2, other.x2) - max(self.x, other.x)
        ih = min(self.y2, other.y2) - max(self.y, other.y)
        if iw <= 0 or ih <= 0:
            return 0
        return iw * ih

    def iou(self, other: "BoundingBox") -> float:
        inter = self.intersection(other)
        return inter / float(self.area + other.area - inter)

    def overlap_min_ratio(self, other: "BoundingBox") -> float:
        """ Intersection over the smaller of the two areas. """
        return self.intersection(other) / float(min(self.area, other.area))

    def within(self, width: int, height: int) -> bool:
        return self.x2 <= width and self.y2 <= height

    def scaled(self, fx: float, fy: float) -> "BoundingBox":
        x1, y1 = int(round(self.x * fx)), int(round(self.y * fy))
        return BoundingBox(x1, y1,
                           max(1, int(round(self.x2 * fx)) - x1),
                           max(1, int(round(self.y2 * fy)) - y1))

    def clipped(self, width: int, height: int) -> "BoundingBox":
        x = min(max(self.x, 0), width - 1)
        y = min(max(self.y, 0), height - 1)
        return BoundingBox(x, y, max(1, min(self.x2, width) - x),
                           max(1, min(self.y2, height) - y))

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float,
                     width: int, height: int) -> "BoundingBox":
        """ Round float corners and clip them into a width × height image. """
        ix1 = int(np.clip(np.floor(x1 + 0.5), 0, width - 1))
        iy1 = int(np.clip(np.floor(y1 + 0.5), 0, height - 1))
        ix2 = int(np.clip(np.floor(x2 + 0.5), ix1 + 1, width))
        iy2 = int(np.clip(np.floor(y2 + 0.5), iy1 + 1, height))
        return cls(ix1, iy1, ix2 - ix1, iy2 - iy1)

    def to_list(self):
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_list(cls, values) -> "BoundingBox":
        x, y, w, h = (int(v) for v in values)
        return cls(x, y, w, h)


def decode_image(data: bytes) -> ImageBuffer:
    """
    Decode an 8-bit PNG or JPEG byte stream.
    Palette and bilevel images are expanded; two and four channel images
    (alpha) are rejected.
    """
    try:
        with Image.open(io.BytesIO(data)) as image:
            if image.format not in ("PNG", "JPEG"):
                raise DecodeError(f"unsupported image format {image.format}")
            image.load()
            mode = image.mode
            if mode == "1":
                image = image.convert("L")
            elif mode == "P":
                if "transparency" in image.info:
                    raise FormatError("palette image with transparency has "
                                      "4 channels")
                image = image.convert("RGB")
            elif mode not in ("L", "RGB"):
                raise FormatError(f"unsupported image mode {mode}")
            array = np.asarray(image, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as error:
        raise DecodeError(f"cannot decode image: {error}") from error
    return ImageBuffer(array.astype(np.float64) / 255.0)


def load_image(path: str) -> ImageBuffer:
    with open(path, 'rb') as file:
        return decode_image(file.read())


def encode_png(img: ImageBuffer) -> bytes:
    array = np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)
    if img.channels == 1:
        image = Image.fromarray(array[:, :, 0])
    else:
        image = Image.fromarray(array)
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def save_png(img: ImageBuffer, path: str):
    with open(path, 'wb') as file:
        file.write(encode_png(img))


def nir_to_three_channel(img: ImageBuffer) -> ImageBuffer:
    """ Clone a single NIR channel into three identical channels. """
    if img.channels != 1:
        raise PreconditionError(f"expected a 1-channel image, got "
                                f"{img.channels} channels")
    return ImageBuffer(np.repeat(img.pixels, 3, axis=2))


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """
    Luminance 0.299 R + 0.587 G + 0.114 B. Pixels whose three channels are
    equal are copied as is, so a cloned NIR image converts back exactly.
    """
    if img.channels == 1:
        return img
    red, green, blue = (img.pixels[:, :, c] for c in range(3))
    luma = (LUMA_WEIGHTS[0] * red + LUMA_WEIGHTS[1] * green
            + LUMA_WEIGHTS[2] * blue)
    grey = (red == green) & (green == blue)
    return ImageBuffer(np.clip(np.where(grey, red, luma), 0.0, 1.0))


def crop(img: ImageBuffer, box: BoundingBox) -> ImageBuffer:
    if not box.within(img.width, img.height):
        raise BoundsError(f"{box} exceeds {img.width}x{img.height} image")
    return ImageBuffer(img.pixels[box.y:box.y2, box.x:box.x2, :])


def _resize_axis(array: np.ndarray, size: int, axis: int) -> np.ndarray:
    length = array.shape[axis]
    if size == length:
        return array
    source = (np.arange(size) + 0.5) * (length / size) - 0.5
    source = np.clip(source, 0.0, length - 1)
    lower = np.floor(source).astype(np.int64)
    upper = np.minimum(lower + 1, length - 1)
    shape = [1] * array.ndim
    shape[axis] = size
    weight = (source - lower).reshape(shape)
    first = np.take(array, lower, axis=axis)
    second = np.take(array, upper, axis=axis)
    # a + t (b - a) keeps constant rows exact
    return first + weight * (second - first)


def resize(img: ImageBuffer, w: int, h: int) -> ImageBuffer:
    """
    Bilinear resampling with pixel-center alignment and edge clamping,
    no anti-alias prefilter.
    """
    if w <= 0 or h <= 0:
        raise PreconditionError(f"target size must be positive, got {w}x{h}")
    array = _resize_axis(img.pixels, w, axis=1)
    array = _resize_axis(array, h, axis=0)
    return ImageBuffer(np.clip(array, 0.0, 1.0))


def paste(host: ImageBuffer, patch: ImageBuffer, x: int, y: int) \
        -> ImageBuffer:
    """ Copy patch into host with its top-left corner at (x, y). """
    box = BoundingBox(x, y, patch.width, patch.height)
    if not box.within(host.width, host.height):
        raise BoundsError(f"{box} exceeds {host.width}x{host.height} host")
    pixels = patch.pixels
    if host.channels == 3 and patch.channels == 1:
        pixels = np.repeat(pixels, 3, axis=2)
    elif host.channels == 1 and patch.channels == 3:
        pixels = to_grayscale(patch).pixels
    array = np.array(host.pixels)
    array[y:box.y2, x:box.x2, :] = pixels
    return ImageBuffer(array)
