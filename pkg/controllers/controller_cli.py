import logging
from concurrent.futures import ThreadPoolExecutor

from controllers.controller_bench import ControllerBench
from controllers.controller_eval import ControllerEval
from controllers.controller_inspect import ControllerInspect
from controllers.controller_recognize import ControllerRecognize
from controllers.controller_synth import ControllerSynth
from controllers.controller_train import ControllerTrain
from views.view_cli import configure_logging, parse_arguments, show_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_ARGUMENT_ERROR = 2


class ControllerCli:
    """
    Entry controller: parses the command line, sets up logging and the
    worker pool, then hands over to the controller of the subcommand.
    Domain errors and I/O failures become exit code 1.
    """
    CONTROLLERS = {
        'synth': ControllerSynth,
        'train': ControllerTrain,
        'recognize': ControllerRecognize,
        'eval': ControllerEval,
        'bench': ControllerBench,
        'inspect': ControllerInspect,
    }

    def start(self, argv) -> int:
        try:
            args = parse_arguments(argv)
        except SystemExit as exit_request:
            return EXIT_ARGUMENT_ERROR if exit_request.code is None \
                else int(exit_request.code)
        configure_logging(args.verbose, args.quiet)

        if args.show_config:
            show_config()
            return EXIT_OK

        match args.command:
            case 'synth' | 'train' | 'recognize' | 'eval' | 'bench' | \
                    'inspect':
                return self.handle_command(args)
            case _:
                return EXIT_ARGUMENT_ERROR

    def handle_command(self, args) -> int:
        controller_class = self.CONTROLLERS[args.command]
        try:
            if args.threads > 1:
                with ThreadPoolExecutor(max_workers=args.threads) as executor:
                    return controller_class(args, executor).start()
            return controller_class(args).start()
        except (ValueError, KeyError, OSError, RuntimeError) as error:
            logger.error("%s failed: %s", args.command, error)
            return EXIT_RUNTIME_ERROR
