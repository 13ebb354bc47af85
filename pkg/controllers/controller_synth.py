import logging

from models.plate_synth import AugmentConfig, DatasetSpec, generate_dataset
from views.view_cli import print_line

logger = logging.getLogger(__name__)


class ControllerSynth:
    """
    Controller of the synth command: writes the images and the manifest of
    a seeded synthetic dataset.
    """
    def __init__(self, args, executor=None):
        self.args = args
        self.executor = executor

    def dataset_spec(self) -> DatasetSpec:
        args = self.args
        return DatasetSpec(
            n=args.n,
            split=(args.train_fraction, 1.0 - args.train_fraction),
            style_mix=args.style_mix,
            seed=args.seed,
            augment=AugmentConfig.none() if args.no_augment
            else AugmentConfig(),
            scene_size=args.scene_size if args.scenes else None)

    def start(self) -> int:
        manifest, records = generate_dataset(self.dataset_spec(),
                                             self.args.out, self.executor)
        n_train = sum(1 for record in records if record.split == "train")
        n_nir = sum(1 for record in records if record.spectrum == "NIR")
        print_line(manifest)
        print_line(f"images: {len(records)} (train {n_train}, "
                   f"val {len(records) - n_train}; NIR {n_nir}, "
                   f"RGB {len(records) - n_nir})")
        return 0
