from unittest.mock import Mock

from construction.errors import StoreError
from main import AkpcCLI, Commands, build_parser, run_command
from verification.reports import VerificationReport


def make_commands():
    controller, renderer = Mock(), Mock()
    return Commands(controller, renderer), controller, renderer


def test_verify_exit_code_is_the_report_code():
    commands, controller, renderer = make_commands()
    report = Mock(spec=VerificationReport)
    report.exit_code = 1
    controller.verify.return_value = report
    args = build_parser().parse_args(["verify", "runs/a", "--props", "P1"])
    assert run_command(args, commands) == 1
    controller.verify.assert_called_once_with("runs/a", ["P1"])
    renderer.render_report.assert_called_once_with(report)


def test_store_errors_exit_with_three():
    commands, controller, renderer = make_commands()
    controller.report.side_effect = StoreError("missing file runs/a/stage_000.json")
    args = build_parser().parse_args(["report", "runs/a"])
    assert run_command(args, commands) == 3
    assert "stage_000.json" in renderer.render_error.call_args.args[0]


def test_report_csv_defaults_into_run_dir():
    commands, controller, _ = make_commands()
    controller.report.return_value = []
    args = build_parser().parse_args(["report", "runs/a", "--csv"])
    assert run_command(args, commands) == 0
    target = controller.write_csv.call_args.args[1]
    assert str(target).replace("\\", "/") == "runs/a/report.csv"


def test_shell_survives_bad_numbers():
    commands, controller, renderer = make_commands()
    cli = AkpcCLI(commands)
    cli.onecmd(cli.precmd("/render runs/a leaf notanumber"))
    assert cli.last_exit == 3
    controller.render.assert_not_called()
    renderer.render_error.assert_called_once()
