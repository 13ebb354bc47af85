import logging

from models.evaluation import EvalReport, evaluate_groups
from models.plate_synth import read_manifest
from models.recognition import PlateReading
from views.view_cli import print_line
from views.view_table import ViewTableConfusable, ViewTableReport

logger = logging.getLogger(__name__)

EXIT_GATE_FAILED = 3


class ControllerEval:
    """
    Controller of the eval command: scores a readings file against the
    manifest ground truth and gates the exit code on --assert-accuracy.
    """
    def __init__(self, args, executor=None):
        self.args = args
        self.executor = executor

    def start(self) -> int:
        args = self.args
        _, readings = PlateReading.read_jsonl(args.readings)
        _, records = read_manifest(args.manifest)
        records = [record for record in records
                   if args.split == "all" or record.split == args.split]
        by_id = {reading.image_id: reading for reading in readings}
        reports = evaluate_groups(by_id, records, args.group_by,
                                  args.iou_threshold)
        overall = reports[0]
        print_line(f"plate detection accuracy: "
                   f"{overall.plate_detect_accuracy:.3f} "
                   f"({overall.plate_detect_correct}/{overall.n_images})")
        print_line(f"recognition accuracy: {overall.recog_accuracy:.3f} "
                   f"({overall.recog_correct}/{overall.n_images})")
        ViewTableReport().show(reports)
        ViewTableConfusable().show_pairs(overall.confusable)
        if args.out:
            EvalReport.write_jsonl(args.out, reports,
                                   iou_threshold=args.iou_threshold,
                                   split=args.split)
        if args.assert_accuracy is not None \
                and overall.recog_accuracy < args.assert_accuracy:
            logger.error("recognition accuracy %.3f is below %.3f",
                         overall.recog_accuracy, args.assert_accuracy)
            return EXIT_GATE_FAILED
        return 0
