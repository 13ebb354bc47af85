import sys
from controllers.controller_cli import ControllerCli


def main(argv=None):
    return ControllerCli().start(sys.argv[1:] if argv is None else argv)


if __name__ == '__main__':
    sys.exit(main())
