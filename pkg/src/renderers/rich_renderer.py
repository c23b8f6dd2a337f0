"""Rich terminal renderer for formatted console output.

Encapsulates all Rich formatting logic and provides a clean interface
for the CLI to render reports, stage tables, errors, and other UI elements.
"""

from typing import Dict, List, Optional

from rich.align import Align
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from verification.reports import Verdict, VerificationReport

VERDICT_STYLES = {
    Verdict.PASS: "bold green",
    Verdict.FAIL: "bold red",
    Verdict.INCONCLUSIVE: "bold yellow",
}


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


class RichRenderer:
    """Handles all terminal rendering using Rich library."""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()

    def render_report(self, report: VerificationReport) -> None:
        """Render one row per property check with its verdict and measured values.

        Args:
            report: The verification report to show
        """
        table = Table(title=f"Verification through stage {report.stage}", show_header=True,
                      header_style="bold magenta")
        table.add_column("Property", style="cyan")
        table.add_column("Stage", justify="right", width=6)
        table.add_column("Verdict", width=13)
        table.add_column("Measured")
        table.add_column("Threshold", style="dim")

        for r in report.reports:
            measured = ", ".join(f"{k}={_fmt(v)}" for k, v in r.measured.items() if not isinstance(v, (list, dict)))
            thresholds = ", ".join(f"{k}<{_fmt(v)}" for k, v in r.thresholds.items()
                                   if not isinstance(v, (list, dict)))
            verdict = Text(r.verdict.value, style=VERDICT_STYLES[r.verdict])
            table.add_row(r.property_id, str(r.stage), verdict, measured, thresholds)

        self.console.print(table)
        for r in report.reports:
            if r.counterexample:
                self.console.print(f"[bold]{r.property_id}[/bold] counterexample: {r.counterexample}", highlight=False)
        style = VERDICT_STYLES[report.verdict]
        self.console.print(f"[{style}]Overall: {report.verdict.value}[/{style}]")

    def render_stage_table(self, rows: List[Dict[str, object]]) -> None:
        """Render the per-stage summary produced by the report command.

        Args:
            rows: Dicts keyed by the CSV column names
        """
        if not rows:
            self.render_warning("No stages in this run")
            return
        table = Table(title="Stages", show_header=True, header_style="bold magenta")
        for column in rows[0]:
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(*(_fmt(v) for v in row.values()))
        self.console.print(table)

    def render_partial(self, partial: Dict[str, object]) -> None:
        self.console.print(
            Panel(
                f"Stopped at stage {partial.get('stage', '?')}: {partial.get('message', '')}",
                title=f"[bold red]Partial run ({partial.get('property', '?')})[/bold red]",
                border_style="red",
            )
        )

    def render_error(self, message: str) -> None:
        """Render an error message with red styling.

        Args:
            message: The error message text
        """
        self.console.print(f"[bold red]Error:[/bold red] {message}", highlight=False)

    def render_success(self, message: str) -> None:
        self.console.print(f"[bold green]✓[/bold green] {message}", highlight=False)

    def render_warning(self, message: str) -> None:
        self.console.print(f"[bold yellow]⚠️[/bold yellow] {message}", highlight=False)

    def render_help(self) -> None:
        """Render the help/commands information."""
        commands = [
            ("/build <config.json> [out]", "Build stages from a run config"),
            ("/verify <dir> [P1,P2,...]", "Replay property checks from a run directory"),
            ("/render <dir> <kind> [x] [res]", "Write a PPM of a leaf, chains or orbit"),
            ("/report <dir> [csv]", "Summarize stages; optionally write a CSV file"),
            ("/cls", "Clear the terminal screen"),
            ("/exit, /quit, /bye", "Quit the app"),
            ("/help", "Show this help message"),
        ]

        content = Text()
        for i, (cmd, desc) in enumerate(commands):
            if i > 0:
                content.append("\n")
            content.append(cmd.ljust(32, " "), style="bold cyan")
            content.append(f"  {desc}")

        content.append("\n\n")
        content.append("Kinds: leaf, chains, orbit. Properties: theta, claim, P1..P5, defects, BF.", style="cyan")

        self.console.print(
            Panel(
                content,
                title="[bold green]Commands[/bold green]",
                border_style="green",
                padding=(1, 2),
            )
        )

    def render_caption(self, caption: str) -> None:
        """Render a caption message with dim styling.

        Args:
            caption: The caption text
        """
        self.console.print(Align.right(f"[dim]{caption}[/dim]"))
