"""Core application controller that runs builds and replays checks over persisted runs.

This module does not perform terminal I/O (no print/input); it depends on an
injected store factory and stage search, and returns results for the CLI to render.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

from app.config import RunConfig
from construction.errors import BudgetExhausted, ConfigError, ConstructionError, NumericalError, StoreError
from construction.search import check_claim, choose_next_stage
from construction.shear import ConjugacyStack, StageParams
from renderers.ppm_renderer import Canvas, image_path, render_chains, render_leaf, render_orbit
from services import StageStore
from services.run_store import RunStore
from verification.reports import EXIT_ERROR, PropertyReport, VerificationReport
from verification.verifier import (
    default_xs,
    verify_BF_hypotheses,
    verify_defects,
    verify_P1,
    verify_P2_P3,
    verify_P4_P5,
    verify_theta_certificate,
)

logger = logging.getLogger(__name__)

PROPERTY_ALIASES = {
    "P1": "P1",
    "P2": "P2-P3",
    "P3": "P2-P3",
    "P2-P3": "P2-P3",
    "P4": "P4-P5",
    "P5": "P4-P5",
    "P4-P5": "P4-P5",
    "BF": "BF-hypotheses",
    "BF-HYPOTHESES": "BF-hypotheses",
    "THETA": "theta-certificate",
    "THETA-CERTIFICATE": "theta-certificate",
    "CLAIM": "claim-3a",
    "CLAIM-3A": "claim-3a",
    "DEFECTS": "defects",
}
ALL_PROPERTIES = ("theta-certificate", "claim-3a", "P1", "P2-P3", "P4-P5", "defects", "BF-hypotheses")
RENDER_KINDS = ("leaf", "chains", "orbit")
DEFECT_COLUMNS = ("semiconjugacy_defect", "period_defect", "deviation_horizontal", "deviation_vertical")
CSV_COLUMNS = (
    "stage", "N", "eps", "b", "m", "q", "max_diameter", "p_distance", "f_distance", "orbit_radius",
) + DEFECT_COLUMNS


def parse_properties(selection: Optional[str]) -> List[str]:
    """'P1,P2,...' -> canonical property ids in check order; None selects all."""
    if not selection:
        return list(ALL_PROPERTIES)
    wanted = set()
    for item in selection.split(","):
        key = item.strip().upper()
        if not key:
            continue
        if key not in PROPERTY_ALIASES:
            raise ConfigError(f"props: unknown property {item.strip()!r}")
        wanted.add(PROPERTY_ALIASES[key])
    return [p for p in ALL_PROPERTIES if p in wanted]


@dataclass
class BuildOutcome:
    run_dir: Path
    stages: List[StageParams]
    reports: List[VerificationReport] = field(default_factory=list)
    partial: Optional[Dict] = None

    @property
    def exit_code(self) -> int:
        if self.partial is not None:
            return EXIT_ERROR
        return max((r.exit_code for r in self.reports), default=0)


class RunController:
    def __init__(
        self,
        store_factory: Callable[[Path], StageStore] = RunStore,
        search: Callable = choose_next_stage,
        default_out: str = "runs",
    ):
        self.store_factory = store_factory
        self.search = search
        self.default_out = default_out

    def _store(self, run_dir) -> StageStore:
        return self.store_factory(Path(run_dir))

    def build(self, config: RunConfig) -> BuildOutcome:
        """Run the stage search config.stages times, persisting every verified stage.

        Budget exhaustion or any other construction failure leaves the verified
        prefix on disk together with a partial-run marker.
        """
        run_dir = Path(config.out or self.default_out)
        store = self._store(run_dir)
        if store.manifest()["stages"]:
            raise StoreError(f"{run_dir} already holds a run; choose another --out")
        store.save_config(config.to_json())

        stages = [StageParams(0, config.N0, config.eps0, config.alpha0)]
        store.save_stage(stages[0])
        outcome = BuildOutcome(run_dir, stages)
        previous_f_distance = None
        for n in range(config.stages):
            logger.info("building stage %d of %d", n + 1, config.stages)
            try:
                result = self._search_stage(stages, config, previous_f_distance)
            except BudgetExhausted as exc:
                store.mark_partial(exc.property_id, str(exc), exc.counterexample)
                outcome.partial = {"property": exc.property_id, "message": str(exc), "stage": n}
                return outcome
            except ConstructionError as exc:
                store.mark_partial(type(exc).__name__, str(exc))
                outcome.partial = {"property": type(exc).__name__, "message": str(exc), "stage": n}
                return outcome
            stages[-1] = result.stage
            stages.append(result.next_stage)
            result.report.add(_defects(stages, n, config.settings))
            outcome.reports.append(result.report)
            store.save_stage(result.stage, result.report)
            store.save_stage(result.next_stage)
            closeness = result.report.get("P4-P5")
            if closeness is not None:
                previous_f_distance = closeness.measured.get("f_distance")

        last = outcome.reports[-1]
        p1_reports = [r.get("P1") for r in outcome.reports]
        if all(p is not None for p in p1_reports):
            last.add(verify_BF_hypotheses(stages, p1_reports=p1_reports))
            store.save_stage(stages[-2], last)
        return outcome

    def _search_stage(self, stages: List[StageParams], config: RunConfig, previous_f_distance: Optional[float]):
        try:
            return self.search(
                stages, config.budgets, config.seed, config.settings, previous_f_distance=previous_f_distance
            )
        except ConstructionError:
            raise
        except (ValueError, ArithmeticError) as exc:
            logger.exception("numeric failure while searching stage %d", stages[-1].n)
            raise NumericalError(f"stage {stages[-1].n}: {type(exc).__name__}: {exc}") from exc

    def verify(self, run_dir, properties: Optional[Sequence[str]] = None) -> VerificationReport:
        """Re-run the requested checks from the persisted stages only."""
        store = self._store(run_dir)
        config = RunConfig.from_json(store.load_config())
        settings = config.settings
        stages = store.load_stages()
        saved = store.load_reports()
        wanted = list(properties) if properties else list(ALL_PROPERTIES)
        transitions = [n for n in range(len(stages) - 1) if stages[n].complete]
        if not transitions:
            raise StoreError(f"{run_dir} holds no completed stage to verify")

        report = VerificationReport(transitions[-1])
        p1_reports: List[PropertyReport] = []
        previous_f_distance = None
        for n in transitions:
            old = saved[n] if n < len(saved) and saved[n] is not None else VerificationReport(n)
            if "theta-certificate" in wanted:
                report.add(verify_theta_certificate(stages[n]))
            if "claim-3a" in wanted:
                claim = old.get("claim-3a")
                omegas = claim.sampling.get("omegas") if claim else None
                if not omegas:
                    m = stages[n].theta.m
                    omegas = [k / (settings.claim_samples * m) for k in range(settings.claim_samples)]
                report.add(check_claim(stages[n].theta, stages[n + 1].N, stages[n].N, omegas, n))
            if "P1" in wanted or "BF-hypotheses" in wanted:
                p1 = old.get("P1")
                xs = p1.sampling.get("xs") if p1 else None
                checked = verify_P1(stages, n, xs or default_xs(settings.p1_samples), settings.boundary_samples)
                p1_reports.append(checked)
                if "P1" in wanted:
                    report.add(checked)
            if "P2-P3" in wanted:
                report.add(verify_P2_P3(stages, n, settings.orbit_seeds, settings.cover_grid))
            if "P4-P5" in wanted:
                closeness = verify_P4_P5(
                    stages, n, settings.grid, previous_f_distance, settings.birkhoff_seeds,
                    settings.birkhoff_iterates, settings.eta_constant,
                )
                previous_f_distance = closeness.measured.get("f_distance")
                report.add(closeness)
            if "defects" in wanted:
                report.add(_defects(stages, n, settings))
        if "BF-hypotheses" in wanted:
            report.add(verify_BF_hypotheses(stages[: transitions[-1] + 2], p1_reports=p1_reports))
        logger.info("verify %s: %s", run_dir, report.verdict.value)
        return report

    def render(self, run_dir, kind: str, x: float = 0.25, resolution: int = 1024, stage: Optional[int] = None,
               png: bool = False) -> List[Path]:
        """Write one image of `kind` for stage `stage` (default: the last stage)."""
        if kind not in RENDER_KINDS:
            raise ConfigError(f"kind: expected one of {', '.join(RENDER_KINDS)}, got {kind!r}")
        store = self._store(run_dir)
        stages = store.load_stages()
        n = len(stages) - 1 if stage is None else stage
        if not 0 <= n < len(stages):
            raise ConfigError(f"stage: run has stages 0..{len(stages) - 1}, got {n}")
        stack = ConjugacyStack.from_stages(stages[:n])
        canvas = self._draw(kind, stages[n], stack, x, resolution)
        paths = [canvas.write(image_path(run_dir, n, kind, x))]
        if png:
            paths.append(canvas.write(image_path(run_dir, n, kind, x, suffix=".png")))
        if canvas.warning:
            logger.warning(canvas.warning)
        return paths

    @staticmethod
    def _draw(kind: str, stage: StageParams, stack: ConjugacyStack, x: float, resolution: int) -> Canvas:
        if kind == "leaf":
            return render_leaf(stack, x, resolution)
        if kind == "chains":
            return render_chains(stage, x, resolution, stack)
        return render_orbit(stack, stage.alpha, (x, 0.0), stage.alpha.q, resolution)

    def report(self, run_dir) -> List[Dict[str, object]]:
        """One row per stage with its parameters and the measured distances."""
        store = self._store(run_dir)
        stages = store.load_stages()
        saved = store.load_reports()
        rows = []
        for stage, verification in zip(stages, saved):
            verification = verification or VerificationReport(stage.n)
            rows.append({
                "stage": stage.n,
                "N": stage.N,
                "eps": stage.eps,
                "b": stage.b,
                "m": stage.m,
                "q": stage.alpha.q,
                "max_diameter": _measured(verification, "P1", "max_diameter"),
                "p_distance": _measured(verification, "P4-P5", "p_distance"),
                "f_distance": _measured(verification, "P4-P5", "f_distance"),
                "orbit_radius": _measured(verification, "P2-P3", "orbit_radius"),
                **{key: _measured(verification, "defects", key) for key in DEFECT_COLUMNS},
            })
        return rows

    @staticmethod
    def write_csv(rows: Iterable[Dict[str, object]], path) -> Path:
        path = Path(path)
        try:
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS, lineterminator="\n")
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: "" if row.get(k) is None else row[k] for k in CSV_COLUMNS})
        except OSError as exc:
            raise StoreError(f"cannot write {path}: {exc}") from exc
        return path


def _measured(report: VerificationReport, property_id: str, key: str):
    found = report.get(property_id)
    return found.measured.get(key) if found is not None else None


def _defects(stages: Sequence[StageParams], n: int, settings) -> PropertyReport:
    return verify_defects(stages, n, settings.grid, settings.defect_points, settings.deviation_seeds,
                          settings.deviation_iterates)
