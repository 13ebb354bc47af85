"""
Binary model container and its JSON export.

Layout, all little-endian:

    b"LPDM"  u16 version  u16 hog_dim
    hog config      u16 cell_size, u16 bins, f64 clamp, f64 eps, u16 levels,
                    f64 scale_step, u16 canonical_height
    detector config f64 threshold, f64 nms_iou, u32 max_candidates_per_class,
                    f64 reject_margin, u16 peak_radius, f64 nms_overlap,
                    u16 min_level, u16 max_level (0xffff: every level)
                    (version 1 files stop after reject_margin)
    str alphabet    (u16 byte length + utf-8)
    u32 class count, then per class:
        str label, u16 mixture count, then per mixture:
            u16 part count, u16 root, f64 bias
            per part: u16 h_cells, u16 w_cells, u16 dim, i32 anchor_x,
                      i32 anchor_y, f64[h * w * dim] weights (h, w, dim order)
            u16 edge count, per edge: u16 parent, u16 child, f64 a, b, c, d
"""
import io
import json
import logging
import os.path
import struct

import numpy as np

from models.exceptions import ModelFileError, ParameterError
from models.hog import HOG_DIM, HogConfig
from models.part_model import (CharacterMixtureSet, CharacterTreeModel,
                               DeformationParams, DetectorConfig, Edge,
                               PartFilter)

logger = logging.getLogger(__name__)

MAGIC = b"LPDM"
FORMAT_VERSION = 2
SUPPORTED_VERSIONS = (1, 2)
ALL_LEVELS = 0xffff


class _Writer:
    def __init__(self):
        self.buffer = io.BytesIO()

    def pack(self, fmt: str, *values):
        self.buffer.write(struct.pack("<" + fmt, *values))

    def text(self, value: str):
        data = value.encode("utf-8")
        self.pack("H", len(data))
        self.buffer.write(data)

    def array(self, values: np.ndarray):
        self.buffer.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise ModelFileError(f"model file truncated at byte {self.offset}")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        values = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return values if len(values) > 1 else values[0]

    def text(self) -> str:
        size = self.unpack("H")
        try:
            return self.take(size).decode("utf-8")
        except UnicodeDecodeError as error:
            raise ModelFileError(f"bad string in model file: {error}") \
                from error

    def array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8") \
            .astype(np.float64)


def dumps_model(mixtures: CharacterMixtureSet) -> bytes:
    writer = _Writer()
    writer.buffer.write(MAGIC)
    dims = {part.dim for _, _, model in mixtures.models()
            for part in model.parts}
    writer.pack("HH", FORMAT_VERSION, dims.pop() if len(dims) == 1
                else HOG_DIM)
    hog = mixtures.hog_config
    writer.pack("HHddHdH", hog.cell_size, hog.bins, hog.clamp, hog.eps,
                hog.levels, hog.scale_step, hog.canonical_height)
    det = mixtures.detector_config
    writer.pack("ddIdHd", det.threshold, det.nms_iou,
                det.max_candidates_per_class, det.reject_margin,
                det.peak_radius, det.nms_overlap)
    writer.pack("HH", det.min_level,
                ALL_LEVELS if det.max_level is None else det.max_level)
    writer.text(mixtures.alphabet)
    writer.pack("I", len(mixtures.alphabet))
    for label in mixtures.alphabet:
        writer.text(label)
        components = mixtures.mixtures[label]
        writer.pack("H", len(components))
        for model in components:
            writer.pack("HHd", len(model.parts), model.root, model.bias)
            for part in model.parts:
                writer.pack("HHHii", part.h_cells, part.w_cells, part.dim,
                            *part.anchor)
                writer.array(part.weights)
            writer.pack("H", len(model.edges))
            for edge in model.edges:
                params = edge.params
                writer.pack("HHdddd", edge.parent, edge.child, params.a,
                            params.b, params.c, params.d)
    return writer.buffer.getvalue()


def loads_model(data: bytes) -> CharacterMixtureSet:
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise ModelFileError("not a model file: bad magic header")
    version, hog_dim = reader.unpack("HH")
    if version not in SUPPORTED_VERSIONS:
        raise ModelFileError(f"unsupported model file version {version}")
    cell_size, bins, clamp, eps, levels, scale_step, height = \
        reader.unpack("HHddHdH")
    hog = HogConfig(cell_size, bins, clamp, eps, levels, scale_step, height)
    threshold, nms_iou, max_candidates, reject_margin = reader.unpack("ddId")
    extra = {}
    if version >= 2:
        peak_radius, nms_overlap, min_level, max_level = \
            reader.unpack("HdHH")
        extra = {"peak_radius": peak_radius, "nms_overlap": nms_overlap,
                 "min_level": min_level,
                 "max_level": None if max_level == ALL_LEVELS else max_level}
    try:
        detector = DetectorConfig(threshold, nms_iou, max_candidates,
                                  reject_margin, **extra)
    except ParameterError as error:
        raise ModelFileError(f"bad detector config: {error}") from error
    alphabet = reader.text()
    class_count = reader.unpack("I")
    mixtures = {}
    for _ in range(class_count):
        label = reader.text()
        components = []
        for _ in range(reader.unpack("H")):
            n_parts, root, bias = reader.unpack("HHd")
            parts = []
            for _ in range(n_parts):
                h_cells, w_cells, dim, ax, ay = reader.unpack("HHHii")
                if dim != hog_dim:
                    raise ModelFileError(f"part dim {dim} != file hog_dim "
                                         f"{hog_dim}")
                weights = reader.array(h_cells * w_cells * dim)
                parts.append(PartFilter(weights.reshape(h_cells, w_cells,
                                                        dim), (ax, ay)))
            edges = []
            for _ in range(reader.unpack("H")):
                parent, child, a, b, c, d = reader.unpack("HHdddd")
                edges.append(Edge(parent, child, DeformationParams(a, b, c,
                                                                   d)))
            components.append(CharacterTreeModel(parts, edges, root, bias,
                                                 label))
        mixtures[label] = components
    if reader.offset != len(data):
        raise ModelFileError(f"{len(data) - reader.offset} trailing bytes "
                             f"after the last class")
    return CharacterMixtureSet(alphabet, mixtures, hog, detector)


def save_model(mixtures: CharacterMixtureSet, path: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as file:
        file.write(dumps_model(mixtures))
    logger.info("model with %d classes saved to %s", len(mixtures.alphabet),
                path)


def load_model(path: str) -> CharacterMixtureSet:
    with open(path, 'rb') as file:
        mixtures = loads_model(file.read())
    logger.debug("model loaded from %s", path)
    return mixtures


def model_to_json(mixtures: CharacterMixtureSet):
    classes = {}
    for label, _, model in mixtures.models():
        classes.setdefault(label, []).append({
            "root": model.root,
            "bias": model.bias,
            "parts": [{"h_cells": part.h_cells, "w_cells": part.w_cells,
                       "anchor": list(part.anchor),
                       "weights": part.weights.tolist()}
                      for part in model.parts],
            "edges": [{"parent": edge.parent, "child": edge.child,
                       "a": edge.params.a, "b": edge.params.b,
                       "c": edge.params.c, "d": edge.params.d}
                      for edge in model.edges]})
    return {"format_version": FORMAT_VERSION,
            "alphabet": mixtures.alphabet,
            "hog_config": mixtures.hog_config.to_dict(),
            "detector_config": mixtures.detector_config.to_dict(),
            "classes": classes}


def export_json(mixtures: CharacterMixtureSet, path: str):
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(model_to_json(mixtures), file, indent=2)
