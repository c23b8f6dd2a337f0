"""Command-line interface entrypoint: one-shot commands or a cmd-based shell with tab completion.

With arguments, a single `build`, `verify`, `render` or `report` command runs and its
exit code is returned (0 pass, 1 fail, 2 inconclusive, 3 budget/IO error). Without
arguments the same commands are available in an interactive `cmd.Cmd` shell with
readline history.
"""

import argparse
import atexit
import cmd
import logging
import os
import readline
import shlex
import sys
from pathlib import Path
from time import time

from rich.logging import RichHandler

# make the `src` directory importable so `app`, `construction` and friends resolve
sys.path.insert(0, os.path.dirname(__file__))

from app.config import env_settings, load_config
from app.controller import RENDER_KINDS, RunController, parse_properties
from construction.errors import ConstructionError
from renderers.rich_renderer import RichRenderer
from verification.reports import EXIT_ERROR


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
        force=True,
    )


def _setup_history(history_file: str):
    try:
        readline.read_history_file(history_file)
    except Exception:
        pass

    def _save():
        try:
            readline.write_history_file(history_file)
        except Exception:
            pass

    atexit.register(_save)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="akpc", description="Build and check pseudo-circle torus diffeomorphisms.")
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build", help="build stages from a run config")
    build.add_argument("--config", required=True, help="run config JSON file")
    build.add_argument("--out", help="run directory (default: $AKPC_OUTPUT_DIR)")

    verify = sub.add_parser("verify", help="replay property checks from a run directory")
    verify.add_argument("run_dir")
    verify.add_argument("--props", help="comma separated subset, e.g. P1,P2,theta")

    render = sub.add_parser("render", help="write a PPM image of a run")
    render.add_argument("run_dir")
    render.add_argument("--kind", choices=RENDER_KINDS, default="leaf")
    render.add_argument("--x", type=float, default=0.25)
    render.add_argument("--res", type=int, default=1024)
    render.add_argument("--stage", type=int)
    render.add_argument("--png", action="store_true", help="also write a PNG copy")

    report = sub.add_parser("report", help="summarize the stages of a run")
    report.add_argument("run_dir")
    report.add_argument("--csv", nargs="?", const="", help="write CSV (default: <run_dir>/report.csv)")
    return parser


class Commands:
    """Shared command bodies for the one-shot runner and the shell; each returns an exit code."""

    def __init__(self, controller: RunController, renderer: RichRenderer):
        self.controller = controller
        self.renderer = renderer

    def build(self, config_path: str, out=None) -> int:
        config = load_config(config_path).with_out(out)
        t_start = time()
        outcome = self.controller.build(config)
        for report in outcome.reports:
            self.renderer.render_report(report)
        if outcome.partial is not None:
            self.renderer.render_partial(outcome.partial)
        else:
            self.renderer.render_success(f"Built {len(outcome.stages) - 1} stage(s) in {outcome.run_dir}")
        self.renderer.render_caption(f"{time() - t_start:.2f} seconds")
        return outcome.exit_code

    def verify(self, run_dir: str, props=None) -> int:
        t_start = time()
        report = self.controller.verify(run_dir, parse_properties(props))
        self.renderer.render_report(report)
        self.renderer.render_caption(f"{time() - t_start:.2f} seconds")
        return report.exit_code

    def render(self, run_dir: str, kind: str, x: float, resolution: int, stage=None, png: bool = False) -> int:
        for path in self.controller.render(run_dir, kind, x, resolution, stage, png):
            self.renderer.render_success(f"Wrote {path}")
        return 0

    def report(self, run_dir: str, csv_path=None) -> int:
        rows = self.controller.report(run_dir)
        self.renderer.render_stage_table(rows)
        if csv_path is not None:
            target = self.controller.write_csv(rows, csv_path or Path(run_dir) / "report.csv")
            self.renderer.render_success(f"Wrote {target}")
        return 0


def run_command(args: argparse.Namespace, commands: Commands) -> int:
    try:
        if args.command == "build":
            return commands.build(args.config, args.out)
        if args.command == "verify":
            return commands.verify(args.run_dir, args.props)
        if args.command == "render":
            return commands.render(args.run_dir, args.kind, args.x, args.res, args.stage, args.png)
        return commands.report(args.run_dir, args.csv)
    except (ConstructionError, OSError) as exc:
        commands.renderer.render_error(str(exc))
        return EXIT_ERROR


class AkpcCLI(cmd.Cmd):
    intro = ""
    prompt = "\n> "

    def __init__(self, commands: Commands):
        super().__init__()
        self.commands = commands
        self.renderer = commands.renderer
        self.last_exit = 0
        readline.set_history_length(1000)

    # Provide slash-based completion for command names
    def completenames(self, text, *ignored):
        if text.startswith("/"):
            text = text[1:]
            return ["/" + name[3:] for name in self.get_names() if name.startswith("do_" + text)]
        return super().completenames(text, *ignored)

    def precmd(self, line):
        # allow users to type commands with a leading slash
        if line.startswith("/"):
            return line[1:]
        return line

    def _run(self, label: str, action) -> None:
        try:
            self.last_exit = action()
        except (ConstructionError, OSError, ValueError) as exc:
            self.last_exit = EXIT_ERROR
            self.renderer.render_error(f"Error in {label}: {exc}")

    def do_help(self, arg):
        self.renderer.render_help()

    def do_build(self, arg):
        parts = shlex.split(arg)
        if not parts:
            self.renderer.render_warning("Usage: /build <config.json> [out]")
            return
        out = parts[1] if len(parts) > 1 else None
        self._run("build", lambda: self.commands.build(parts[0], out))

    def do_verify(self, arg):
        parts = shlex.split(arg)
        if not parts:
            self.renderer.render_warning("Usage: /verify <dir> [P1,P2,...]")
            return
        props = parts[1] if len(parts) > 1 else None
        self._run("verify", lambda: self.commands.verify(parts[0], props))

    def do_render(self, arg):
        parts = shlex.split(arg)
        if len(parts) < 2:
            self.renderer.render_warning("Usage: /render <dir> <leaf|chains|orbit> [x] [res]")
            return

        def action():
            x = float(parts[2]) if len(parts) > 2 else 0.25
            res = int(parts[3]) if len(parts) > 3 else 1024
            return self.commands.render(parts[0], parts[1], x, res)

        self._run("render", action)

    def do_report(self, arg):
        parts = shlex.split(arg)
        if not parts:
            self.renderer.render_warning("Usage: /report <dir> [csv]")
            return
        csv_path = None
        if len(parts) > 1:
            csv_path = "" if parts[1] == "csv" else parts[1]
        self._run("report", lambda: self.commands.report(parts[0], csv_path))

    def do_cls(self, arg):
        os.system("cls" if os.name == "nt" else "clear")

    def do_exit(self, arg):
        self.renderer.render_success("Goodbye!")
        return True

    def do_quit(self, arg):
        return self.do_exit(arg)

    def do_bye(self, arg):
        return self.do_exit(arg)

    def default(self, line):
        if not line.strip():
            return
        self.renderer.render_warning(f"Unknown command: {line.split()[0]} (try /help)")

    def emptyline(self):
        pass


def main(argv=None) -> int:
    settings = env_settings()
    _setup_logging(settings.log_level)

    renderer = RichRenderer()
    controller = RunController(default_out=settings.output_dir)
    commands = Commands(controller, renderer)

    argv = sys.argv[1:] if argv is None else argv
    if argv:
        return run_command(build_parser().parse_args(argv), commands)

    _setup_history(settings.history_file)
    renderer.render_help()
    cli = AkpcCLI(commands)
    cli.cmdloop()
    return cli.last_exit


if __name__ == "__main__":
    sys.exit(main())
