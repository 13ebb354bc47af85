import sys
from abc import ABC, abstractmethod
from typing import Dict, List, Sequence

from models.evaluation import EvalReport, LatencyStats
from models.part_model import CharacterMixtureSet
from models.recognition import PlateReading


class ViewTable(ABC):
    """
    Abstract class for the fixed-width text tables printed by the commands.
    A row is a list of cells joined by SEPARATOR, and a separator line
    follows the headers.

    Constants to be defined in child classes:
        COLUMNS: (header, width) of every column.
    """
    SEPARATOR = " │ "

    # Need to be implemented in child class
    COLUMNS = []

    def __init__(self, stream=None):
        self.stream = stream if stream is not None else sys.stdout

    @staticmethod
    def reformat_id(record_id):
        length_id_target = 6
        return f"#{str(record_id).zfill(length_id_target)}"

    @staticmethod
    def reformat_name(name, target_length):
        if len(name) <= target_length:
            return name.ljust(target_length)
        else:
            return name[:target_length - 1] + "."

    @staticmethod
    def reformat_number(value, target_length, digits=3):
        if value is None:
            return "-".rjust(target_length)
        if isinstance(value, int):
            return str(value).rjust(target_length)
        return f"{value:.{digits}f}".rjust(target_length)

    @staticmethod
    def update_separator_line(content):
        parts = content.split(ViewTable.SEPARATOR)
        line = ""
        for i, part in enumerate(parts):
            if i > 0:
                line += "─┼─"
            line += "─" * len(part)
        return line

    def create_header(self):
        return self.SEPARATOR.join(self.reformat_name(header, width)
                                   for header, width in self.COLUMNS)

    @abstractmethod
    def create_content(self, data) -> List[str]:
        """ Cells of one row, already padded to their column width. """
        raise NotImplementedError

    def render(self, rows: Sequence) -> str:
        header = self.create_header()
        lines = [header, self.update_separator_line(header)]
        for data in rows:
            lines.append(self.SEPARATOR.join(self.create_content(data)))
        return "\n".join(lines)

    def show(self, rows: Sequence):
        self.stream.write(self.render(rows) + "\n")


class ViewTableReadings(ViewTable):
    COLUMNS = [("ID", 7), ("Plate", 10), ("Valid", 5), ("Min score", 9),
               ("Rejected", 8), ("Plate box", 20)]

    def create_content(self, data: PlateReading):
        box = "no plate" if data.plate_box is None \
            else " ".join(str(v) for v in data.plate_box.to_list())
        return [self.reformat_id(data.image_id),
                self.reformat_name(data.text, 10),
                self.reformat_name("yes" if data.valid else "no", 5),
                self.reformat_number(data.min_score, 9),
                self.reformat_number(len(data.rejected), 8),
                self.reformat_name(box, 20)]


class ViewTableReport(ViewTable):
    COLUMNS = [("Group", 6), ("Images", 6), ("Plate acc", 9),
               ("Recog acc", 9), ("Char prec", 9), ("Char rec", 9),
               ("Mean ms", 8)]

    def create_content(self, data: EvalReport):
        chars = data.character_metrics
        latency = None if data.latency is None else data.latency.mean_ms
        return [self.reformat_name(data.group, 6),
                self.reformat_number(data.n_images, 6),
                self.reformat_number(data.plate_detect_accuracy, 9),
                self.reformat_number(data.recog_accuracy, 9),
                self.reformat_number(chars.precision, 9),
                self.reformat_number(chars.recall, 9),
                self.reformat_number(latency, 8, digits=1)]


class ViewTableConfusable(ViewTable):
    COLUMNS = [("Truth->Predicted", 16), ("Count", 6)]

    def create_content(self, data):
        pair, count = data
        return [self.reformat_name(pair, 16), self.reformat_number(count, 6)]

    def show_pairs(self, pairs: Dict[str, int]):
        self.show(list(pairs.items()))


class ViewTableLatency(ViewTable):
    COLUMNS = [("Calls", 6), ("Mean ms", 9), ("p50 ms", 9), ("p95 ms", 9),
               ("FPS", 7)]

    def create_content(self, data: LatencyStats):
        return [self.reformat_number(data.n, 6),
                self.reformat_number(data.mean_ms, 9, digits=2),
                self.reformat_number(data.p50_ms, 9, digits=2),
                self.reformat_number(data.p95_ms, 9, digits=2),
                self.reformat_number(data.fps, 7, digits=1)]


class ViewTableModel(ViewTable):
    COLUMNS = [("Class", 5), ("Mixture", 7), ("Parts", 5), ("Root", 5),
               ("Bias", 8), ("Deformation a/b", 16)]

    def create_content(self, data):
        label, index, model = data
        root = model.root_filter
        deformation = ", ".join(f"{e.params.a:.3f}/{e.params.b:.3f}"
                                for e in model.edges)
        return [self.reformat_name(label, 5),
                self.reformat_number(index, 7),
                self.reformat_number(len(model.parts), 5),
                self.reformat_name(f"{root.w_cells}x{root.h_cells}", 5),
                self.reformat_number(model.bias, 8),
                self.reformat_name(deformation, 16)]

    def show_model(self, mixtures: CharacterMixtureSet):
        self.show(list(mixtures.models()))
