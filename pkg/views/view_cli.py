"""
Command-line surface: the argparse parser of every subcommand, logging
setup and the --show-config dump.
"""
import argparse
import json
import logging
import os
import sys

from models.hog import HogConfig
from models.localizer import LOCALIZERS, HeuristicConfig
from models.part_model import DetectorConfig
from models.plate_synth import AugmentConfig, PlateFormat
from models.recognition import OVERLAP_MODES, RecognitionConfig
from models.trainer import TrainingConfig

MODEL_PATH_ENV = "LPR_MODEL_PATH"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
SPLITS = ("train", "val", "all")


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got "
                                         f"{text}")
    return value


def non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got "
                                         f"{text}")
    return value


def unit_fraction(text):
    """ A real in (0, 1]. """
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1], got "
                                         f"{text}")
    return value


def probability(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got "
                                         f"{text}")
    return value


def positive_float(text):
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive value, got "
                                         f"{text}")
    return value


def non_negative_float(text):
    value = float(text)
    if not value >= 0.0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got "
                                         f"{text}")
    return value


def existing_file(text):
    if not os.path.isfile(text):
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return text


def scene_size(text):
    try:
        width, height = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text}")
    if width < 1 or height < 1:
        raise argparse.ArgumentTypeError("scene size must be positive")
    return width, height


def _add_model_argument(parser):
    parser.add_argument("--model", default=os.environ.get(MODEL_PATH_ENV),
                        help=f"model file (default: ${MODEL_PATH_ENV})")


def _add_input_arguments(parser):
    parser.add_argument("images", nargs="*",
                        help="image files; their stem is the image id")
    parser.add_argument("--manifest", type=existing_file,
                        help="synthetic manifest whose images are read")
    parser.add_argument("--split", choices=SPLITS, default="val",
                        help="manifest split to read (default: val)")
    parser.add_argument("--localizer", choices=LOCALIZERS, default="full")
    parser.add_argument("--detections", type=existing_file,
                        help="plate detections file or manifest for the "
                             "annotation localizer")


def _add_recognition_arguments(parser):
    parser.add_argument("--threshold", type=float,
                        help="detection threshold (default: from the model)")
    parser.add_argument("--overlap-ratio", type=unit_fraction, default=0.7)
    parser.add_argument("--overlap-mode", choices=OVERLAP_MODES,
                        default="min-area")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpr",
        description="Segmentation-free license plate recognition with "
                    "deformable part models of characters.")
    parser.add_argument("--show-config", action="store_true",
                        help="print every default as JSON and exit")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    parser.add_argument("--threads", type=positive_int,
                        default=os.cpu_count() or 1,
                        help="worker threads (default: available cores)")
    parser.add_argument("--seed", type=non_negative_int, default=0)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    synth = commands.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("--n", type=positive_int, required=True)
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--train-fraction", type=probability, default=0.8)
    synth.add_argument("--style-mix", type=probability, default=0.5,
                       help="fraction of NIR-style plates")
    synth.add_argument("--no-augment", action="store_true")
    synth.add_argument("--scenes", action="store_true",
                       help="paste every plate into a larger scene")
    synth.add_argument("--scene-size", type=scene_size, default=(640, 480),
                       help="scene WIDTHxHEIGHT (default: 640x480)")

    train = commands.add_parser("train", help="train the character models")
    train.add_argument("--manifest", type=existing_file, required=True)
    train.add_argument("--out", required=True, help="model file to write")
    train.add_argument("--split", choices=SPLITS, default="train")
    train.add_argument("--epochs", type=non_negative_int)
    train.add_argument("--latent-rounds", type=positive_int)
    train.add_argument("--mixtures", type=positive_int)
    train.add_argument("--max-positives", type=positive_int)
    train.add_argument("--negative-pool", type=positive_int)
    train.add_argument("--lr", type=positive_float, help="initial rate")
    train.add_argument("--decay", type=unit_fraction)
    train.add_argument("--reg-c", type=non_negative_float)
    train.add_argument("--classes", help="subset of the alphabet to train")
    train.add_argument("--log", help="plain-text training log file")

    recognize = commands.add_parser("recognize", help="read plates")
    _add_model_argument(recognize)
    _add_input_arguments(recognize)
    _add_recognition_arguments(recognize)
    recognize.add_argument("--out", help="readings file to write")
    recognize.add_argument("--overlay", help="directory for annotated PNGs")

    evaluate = commands.add_parser("eval", help="score readings")
    evaluate.add_argument("--readings", type=existing_file, required=True)
    evaluate.add_argument("--manifest", type=existing_file, required=True)
    evaluate.add_argument("--split", choices=SPLITS, default="val")
    evaluate.add_argument("--iou-threshold", type=unit_fraction, default=0.8)
    evaluate.add_argument("--group-by", choices=("spectrum",))
    evaluate.add_argument("--assert-accuracy", type=probability,
                          help="exit 3 when recognition accuracy is lower")
    evaluate.add_argument("--out", help="report file to write")

    bench = commands.add_parser("bench", help="time recognition")
    _add_model_argument(bench)
    _add_input_arguments(bench)
    _add_recognition_arguments(bench)
    bench.add_argument("--warmup", type=non_negative_int, default=1)
    bench.add_argument("--reps", type=positive_int, default=1)

    inspect = commands.add_parser("inspect", help="export a model")
    _add_model_argument(inspect)
    inspect.add_argument("--json", help="JSON export path")
    inspect.add_argument("--render", help="directory for template PNGs")
    return parser


def parse_arguments(argv):
    """ Parse argv; argparse exits with code 2 on argument errors. """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.show_config:
        return args
    if args.command is None:
        parser.error("a command is required")
    if args.command in ("recognize", "bench", "inspect") and not args.model:
        parser.error(f"--model is required (or set ${MODEL_PATH_ENV})")
    if args.command in ("recognize", "bench"):
        if args.manifest is None and not args.images:
            parser.error("give image files or --manifest")
        if args.localizer == "annotation" and args.detections is None \
                and args.manifest is None:
            parser.error("the annotation localizer needs --detections")
    if args.command == "train" and args.classes is not None:
        if not args.classes or len(set(args.classes)) != len(args.classes):
            parser.error("--classes must list distinct characters")
    return args


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else \
        logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr,
                        force=True)


def default_config() -> dict:
    return {"hog": HogConfig().to_dict(),
            "detector": DetectorConfig().to_dict(),
            "training": TrainingConfig().to_dict(),
            "augment": AugmentConfig().to_dict(),
            "plate_format": PlateFormat().to_dict(),
            "heuristic_localizer": HeuristicConfig().to_dict(),
            "recognition": RecognitionConfig().to_dict(),
            "model_path_env": MODEL_PATH_ENV}


def show_config(stream=None):
    stream = stream if stream is not None else sys.stdout
    stream.write(json.dumps(default_config(), indent=2, sort_keys=True)
                 + "\n")


def print_line(message: str, stream=None):
    stream = stream if stream is not None else sys.stdout
    stream.write(message + "\n")
