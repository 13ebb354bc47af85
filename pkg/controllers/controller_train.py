import logging
from dataclasses import replace

from models.model_file import save_model
from models.trainer import (TrainingConfig, TrainingLog,
                            samples_from_manifest, train_character_models)
from views.view_cli import print_line

logger = logging.getLogger(__name__)


class ControllerTrain:
    """
    Controller of the train command: trains every class on the manifest
    split and writes the model file.
    """
    OVERRIDES = {"epochs": "epochs",
                 "latent_rounds": "latent_rounds",
                 "mixtures": "mixtures_per_class",
                 "max_positives": "max_positives_per_class",
                 "negative_pool": "negative_pool_size",
                 "lr": "lambda0",
                 "decay": "decay",
                 "reg_c": "reg_c",
                 "classes": "alphabet"}

    def __init__(self, args, executor=None):
        self.args = args
        self.executor = executor

    def training_config(self) -> TrainingConfig:
        changes = {field: getattr(self.args, option)
                   for option, field in self.OVERRIDES.items()
                   if getattr(self.args, option) is not None}
        return replace(TrainingConfig(), rng_seed=self.args.seed, **changes)

    def start(self) -> int:
        args = self.args
        config = self.training_config()
        split = None if args.split == "all" else args.split
        samples = samples_from_manifest(args.manifest, split)
        logger.info("%d samples from %s (split %s)", len(samples),
                    args.manifest, args.split)
        log = TrainingLog()
        mixtures = train_character_models(samples, config,
                                          executor=self.executor, log=log)
        save_model(mixtures, args.out)
        if args.log:
            log.write(args.log)
        lines = log.lines()
        print_line(lines[-1] if lines else "no SGD epoch run, "
                                           "initialization-only model")
        print_line(args.out)
        return 0
