import logging
from dataclasses import dataclass, asdict, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from models.exceptions import BoundsError, ParameterError, PreconditionError
from models.hog import HOG_DIM, HogCellGrid, HogConfig
from models.image_buffer import BoundingBox

logger = logging.getLogger(__name__)

DIGITS = "0123456789"
# 23 letters, 'Q', 'W' and 'X' never appear on the plates
LETTERS = "ABCDEFGHIJKLMNOPRSTUVYZ"
ALPHABET = DIGITS + LETTERS
PLATE_LABEL = "PLATE"

CONCAVITY_EPS = 1e-3


@dataclass(frozen=True)
class DetectorConfig:
    """
    Dense detection settings. Only root positions that are the maximum of
    their (2 peak_radius + 1)^2 neighbourhood on a level become candidates;
    per-class suppression drops a detection whose IoU with a stronger one
    exceeds nms_iou or whose intersection covers more than nms_overlap of
    the smaller box. Levels outside [min_level, max_level] are not scanned;
    max_level None scans every level.
    """
    threshold: float = 0.0
    nms_iou: float = 0.5
    max_candidates_per_class: int = 200
    reject_margin: float = 0.5
    peak_radius: int = 1
    nms_overlap: float = 0.5
    min_level: int = 0
    max_level: Optional[int] = None

    def __post_init__(self):
        if self.min_level < 0 or (self.max_level is not None
                                  and self.max_level < self.min_level):
            raise ParameterError(f"bad level range {self.min_level}.."
                                 f"{self.max_level}")
        if not 0.0 < self.nms_iou <= 1.0 or not 0.0 < self.nms_overlap <= 1.0:
            raise ParameterError("nms_iou and nms_overlap must lie in (0, 1]")
        if self.peak_radius < 0 or self.max_candidates_per_class < 1:
            raise ParameterError("peak_radius must be >= 0 and "
                                 "max_candidates_per_class >= 1")

    def scans_level(self, level: int) -> bool:
        return self.min_level <= level and (self.max_level is None
                                            or level <= self.max_level)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True, eq=False)
class PartFilter:
    """
    One HOG template. weights is a (h_cells, w_cells, dim) array; anchor is
    the expected (dx, dy) cell offset of this part from its parent.
    """
    weights: np.ndarray
    anchor: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 3:
            raise PreconditionError("filter weights must be (h, w, dim)")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "anchor", (int(self.anchor[0]),
                                            int(self.anchor[1])))

    @property
    def w_cells(self) -> int:
        return self.weights.shape[1]

    @property
    def h_cells(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[2]


@dataclass(frozen=True)
class DeformationParams:
    """ Coefficients of a dx^2 + b dy^2 + c dx + d dy for one tree edge. """
    a: float
    b: float
    c: float = 0.0
    d: float = 0.0

    def is_concave(self, eps: float = CONCAVITY_EPS) -> bool:
        return self.a <= -eps and self.b <= -eps

    def projected(self, eps: float = CONCAVITY_EPS) -> "DeformationParams":
        return replace(self, a=min(self.a, -eps), b=min(self.b, -eps))

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=np.float64)


@dataclass(frozen=True)
class Edge:
    parent: int
    child: int
    params: DeformationParams


@dataclass(frozen=True)
class PartPlacement:
    """ Top-left cell (x, y) of every part, indexed like model.parts. """
    level: int
    positions: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    label: str
    score: float

    @property
    def is_digit(self) -> bool:
        return self.label in DIGITS

    def to_json(self):
        return {"label": self.label, "box": self.box.to_list(),
                "score": round(float(self.score), 6)}

    @classmethod
    def from_json(cls, data):
        return cls(BoundingBox.from_list(data["box"]), data["label"],
                   float(data["score"]))


@dataclass(frozen=True, eq=False)
class CharacterTreeModel:
    """
    One mixture component: parts V, tree edges E rooted at `root`, a bias
    and the character class it detects.
    """
    parts: Tuple[PartFilter, ...]
    edges: Tuple[Edge, ...]
    root: int = 0
    bias: float = 0.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "edges", tuple(self.edges))
        n_parts = len(self.parts)
        if not 0 <= self.root < n_parts:
            raise PreconditionError(f"root {self.root} is not a part index")
        if self.parts[self.root].anchor != (0, 0):
            raise PreconditionError("the root part must have anchor (0, 0)")
        if len(self.edges) != n_parts - 1:
            raise PreconditionError(f"{n_parts} parts need {n_parts - 1} "
                                    f"edges, got {len(self.edges)}")
        children = {i: [] for i in range(n_parts)}
        seen_child = set()
        for edge in self.edges:
            if edge.child == self.root or edge.child in seen_child:
                raise PreconditionError("edges do not form a tree")
            if not (0 <= edge.parent < n_parts and 0 <= edge.child < n_parts):
                raise PreconditionError("edge references a missing part")
            seen_child.add(edge.child)
            children[edge.parent].append((edge.child, edge.params))
        object.__setattr__(self, "_children", children)
        if len(self.postorder()) != n_parts:
            raise PreconditionError("edges do not span all parts")
        dims = {part.dim for part in self.parts}
        if len(dims) != 1:
            raise PreconditionError("all parts must share one feature dim")

    def children(self, part: int) -> List[Tuple[int, DeformationParams]]:
        return self._children[part]

    def postorder(self) -> List[int]:
        """ Part indices, children before parents, root last. """
        order, stack, visited = [], [(self.root, False)], set()
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node in visited:
                continue
            visited.add(node)
            stack.append((node, True))
            for child, _ in reversed(self._children[node]):
                stack.append((child, False))
        return order

    @property
    def root_filter(self) -> PartFilter:
        return self.parts[self.root]

    def check_concave(self):
        for edge in self.edges:
            if not edge.params.is_concave():
                raise ParameterError(f"edge {edge.parent}->{edge.child} of "
                                     f"'{self.label}' is not concave: "
                                     f"{edge.params}")


@dataclass(frozen=True, eq=False)
class CharacterMixtureSet:
    """ Mixture components for every class of the alphabet. """
    alphabet: str
    mixtures: Dict[str, List[CharacterTreeModel]]
    hog_config: HogConfig = HogConfig()
    detector_config: DetectorConfig = DetectorConfig()

    def __post_init__(self):
        for label in self.alphabet:
            if not self.mixtures.get(label):
                raise PreconditionError(f"class '{label}' has no mixture "
                                        f"component")

    def models(self):
        """ Yield (label, mixture index, model) in alphabet order. """
        for label in self.alphabet:
            for index, model in enumerate(self.mixtures[label]):
                yield label, index, model


def default_topology(label: str,
                     dim: int = HOG_DIM,
                     root_size: Tuple[int, int] = (4, 8),
                     part_size: Tuple[int, int] = (4, 4)) -> CharacterTreeModel:
    """
    Three-part star: a root covering the glyph and two children anchored on
    its upper and lower halves.
    """
    root_w, root_h = root_size
    part_w, part_h = part_size
    params = DeformationParams(a=-0.1, b=-0.1, c=0.0, d=0.0)
    parts = (PartFilter(np.zeros((root_h, root_w, dim))),
             PartFilter(np.zeros((part_h, part_w, dim)), anchor=(0, 0)),
             PartFilter(np.zeros((part_h, part_w, dim)),
                        anchor=(0, root_h - part_h)))
    edges = (Edge(0, 1, params), Edge(0, 2, params))
    return CharacterTreeModel(parts, edges, root=0, bias=0.0, label=label)


def deformation_term(params: DeformationParams, dx, dy):
    """ a dx^2 + b dy^2 + c dx + d dy; dx and dy may be arrays. """
    return params.a * dx * dx + params.b * dy * dy + params.c * dx \
        + params.d * dy


def _window_matrix(grid: HogCellGrid, h_cells: int, w_cells: int) \
        -> Tuple[np.ndarray, Tuple[int, int]]:
    if h_cells > grid.cells_y or w_cells > grid.cells_x:
        raise PreconditionError(f"{w_cells}x{h_cells} filter larger than "
                                f"{grid.cells_x}x{grid.cells_y} grid")
    windows = sliding_window_view(grid.features, (h_cells, w_cells),
                                  axis=(0, 1))
    out_h, out_w = windows.shape[0], windows.shape[1]
    # (out_h, out_w, dim, h, w) -> rows of (h, w, dim) patches
    matrix = np.ascontiguousarray(windows.transpose(0, 1, 3, 4, 2))
    return matrix.reshape(out_h * out_w, -1), (out_h, out_w)


def appearance_responses(weights: Sequence[np.ndarray],
                         grid: HogCellGrid) -> np.ndarray:
    """
    Valid-mode correlation of a bank of equally sized filters with a grid.
    :return: (n_filters, cells_y - h + 1, cells_x - w + 1)
    """
    stack = np.stack([np.asarray(w, dtype=np.float64) for w in weights])
    n_filters, h_cells, w_cells, dim = stack.shape
    if dim != grid.dim:
        raise PreconditionError(f"filter dim {dim} != grid dim {grid.dim}")
    matrix, (out_h, out_w) = _window_matrix(grid, h_cells, w_cells)
    scores = matrix @ stack.reshape(n_filters, -1).T
    return np.ascontiguousarray(scores.T).reshape(n_filters, out_h, out_w)


def appearance_response(filter: PartFilter, grid: HogCellGrid) -> np.ndarray:
    return appearance_responses([filter.weights], grid)[0]


def check_placement(model: CharacterTreeModel, grid: HogCellGrid,
                    placement: PartPlacement):
    if len(placement.positions) != len(model.parts):
        raise PreconditionError("placement does not cover every part")
    for part, (x, y) in zip(model.parts, placement.positions):
        if not (0 <= x <= grid.cells_x - part.w_cells
                and 0 <= y <= grid.cells_y - part.h_cells):
            raise BoundsError(f"part at ({x}, {y}) outside "
                              f"{grid.cells_x}x{grid.cells_y} grid")


def score_configuration(model: CharacterTreeModel, level: HogCellGrid,
                        placement: PartPlacement) -> float:
    """
    Sum of part appearance scores, edge deformation terms and the bias,
    accumulated leaf to root in the same order inference uses.
    """
    check_placement(model, level, placement)
    positions = placement.positions
    subtree = {}
    for i in model.postorder():
        part = model.parts[i]
        x, y = positions[i]
        patch = level.features[y:y + part.h_cells, x:x + part.w_cells, :]
        total = float(np.dot(patch.ravel(), part.weights.ravel()))
        for child, params in model.children(i):
            cx, cy = positions[child]
            ax, ay = model.parts[child].anchor
            total += subtree[child] + deformation_term(
                params, cx - x - ax, cy - y - ay)
        subtree[i] = total
    return subtree[model.root] + model.bias
