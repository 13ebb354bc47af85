from models.model_file import export_json, load_model
from views.view_cli import print_line
from views.view_overlay import render_templates
from views.view_table import ViewTableModel


class ControllerInspect:
    """ Controller of the inspect command: model summary and exports. """
    def __init__(self, args, executor=None):
        self.args = args
        self.executor = executor

    def start(self) -> int:
        mixtures = load_model(self.args.model)
        ViewTableModel().show_model(mixtures)
        if self.args.json:
            export_json(mixtures, self.args.json)
            print_line(self.args.json)
        if self.args.render:
            paths = render_templates(mixtures, self.args.render)
            print_line(f"{len(paths)} templates in {self.args.render}")
        return 0
