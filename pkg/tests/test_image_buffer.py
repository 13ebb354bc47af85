import numpy as np
import pytest

from models.exceptions import BoundsError, DecodeError, FormatError, PreconditionError
from models.image_buffer import (BoundingBox, ImageBuffer, crop, decode_image, encode_png, load_image,
                                 nir_to_three_channel, paste, resize, save_png, to_grayscale)


@pytest.fixture
def rng():
    return np.random.default_rng(3)


class TestImageBuffer:
    def test_pixels_are_read_only(self):
        img = ImageBuffer(np.zeros((4, 5)))
        assert (img.width, img.height, img.channels) == (5, 4, 1)
        with pytest.raises(ValueError):
            img.pixels[0, 0, 0] = 1.0

    def test_out_of_range_values_are_rejected(self):
        with pytest.raises(PreconditionError):
            ImageBuffer(np.full((2, 2), 1.5))

    def test_two_channels_are_rejected(self):
        with pytest.raises(FormatError):
            ImageBuffer(np.zeros((2, 2, 2)))


class TestBoundingBox:
    def test_iou_of_identical_boxes_is_one(self):
        box = BoundingBox(3, 4, 10, 5)
        assert box.iou(box) == 1.0

    def test_iou_is_symmetric(self):
        a, b = BoundingBox(0, 0, 10, 10), BoundingBox(5, 5, 10, 10)
        assert a.iou(b) == b.iou(a) == pytest.approx(25 / 175)

    def test_disjoint_boxes(self):
        a, b = BoundingBox(0, 0, 4, 4), BoundingBox(10, 10, 4, 4)
        assert a.intersection(b) == 0
        assert a.iou(b) == 0.0

    def test_overlap_min_ratio_of_nested_box(self):
        outer, inner = BoundingBox(0, 0, 20, 20), BoundingBox(5, 5, 4, 4)
        assert inner.overlap_min_ratio(outer) == 1.0
        assert inner.iou(outer) == pytest.approx(16 / 400)

    def test_from_corners_clips_to_image(self):
        box = BoundingBox.from_corners(-3.2, 1.6, 50.0, 9.4, 40, 8)
        assert box.to_list() == [0, 2, 40, 6]

    def test_non_positive_size_is_rejected(self):
        with pytest.raises(PreconditionError):
            BoundingBox(0, 0, 0, 3)

    def test_clipped_and_scaled(self):
        box = BoundingBox(30, 2, 20, 10)
        assert box.clipped(40, 8).to_list() == [30, 2, 10, 6]
        assert box.scaled(0.5, 2.0).to_list() == [15, 4, 10, 20]


class TestCodec:
    def test_png_round_trip_quantizes_to_8_bits(self, rng, tmp_path):
        img = ImageBuffer(rng.random((6, 7, 3)))
        path = str(tmp_path / "img.png")
        save_png(img, path)
        loaded = load_image(path)
        assert np.max(np.abs(loaded.pixels - img.pixels)) <= 0.5 / 255 + 1e-12

    def test_grayscale_round_trip_keeps_one_channel(self, rng):
        img = ImageBuffer(rng.random((5, 5)))
        assert decode_image(encode_png(img)).channels == 1

    def test_garbage_bytes_fail_to_decode(self):
        with pytest.raises(DecodeError):
            decode_image(b"not an image at all")


class TestConversions:
    def test_nir_clone_converts_back_exactly(self, rng):
        nir = ImageBuffer(rng.random((8, 9)))
        cloned = nir_to_three_channel(nir)
        assert cloned.channels == 3
        assert to_grayscale(cloned) == nir

    def test_nir_clone_needs_one_channel(self, rng):
        with pytest.raises(PreconditionError):
            nir_to_three_channel(ImageBuffer(rng.random((4, 4, 3))))

    def test_luminance_weights(self):
        pixel = np.array([[[1.0, 0.0, 0.0]]])
        assert to_grayscale(ImageBuffer(pixel)).pixels[0, 0, 0] == pytest.approx(0.299)

    def test_crop_outside_image(self, rng):
        img = ImageBuffer(rng.random((10, 10)))
        assert crop(img, BoundingBox(2, 3, 4, 5)).pixels.shape == (5, 4, 1)
        with pytest.raises(BoundsError):
            crop(img, BoundingBox(8, 0, 4, 4))

    def test_resize_keeps_constant_images_constant(self):
        img = ImageBuffer(np.full((7, 11), 0.25))
        resized = resize(img, 23, 5)
        assert (resized.width, resized.height) == (23, 5)
        assert np.all(resized.pixels == 0.25)

    def test_paste_places_the_patch(self):
        host = ImageBuffer(np.zeros((10, 10, 3)))
        patch = ImageBuffer(np.ones((2, 3)))
        result = paste(host, patch, 4, 5)
        assert result.pixels[5:7, 4:7].min() == 1.0
        assert result.pixels.sum() == 2 * 3 * 3
