import sys
import time
import traceback
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path

from rokhlindim.actions import Action, IfExists, WriteCSV, WriteJSON
from rokhlindim.dynsys import system_to_json
from rokhlindim.rokhlin import crossed_product_bound, report_bounds
from rokhlindim.scenario.scenario import Scenario
from rokhlindim.scenario.stages import (
    STAGE_FUNCTIONS,
    ScenarioContext,
    StageResult,
)
from rokhlindim.utils.path import get_out_path
from rokhlindim.utils.tabular import (
    DONE,
    ERROR,
    FAILED,
    RUNNING,
    SKIP,
    PlainTab,
    stage_tab,
)

lg = getLogger(__name__)

__all__ = ['REPORT_SCHEMA', 'RunReport', 'ScenarioRunner']

REPORT_SCHEMA = 'rokhlindim.report/1'


@dataclass
class RunReport:
    """
    Per-stage outcomes of a run

    Wall-clock timings are kept apart from the JSON report so that two
    runs of a scenario produce identical reports.
    """

    scenario: dict
    stages: list[dict] = field(default_factory=list)
    bounds: dict = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.stages) and all(
            s['status'] == DONE for s in self.stages
        )

    def stage(self, name: str) -> dict:
        for s in self.stages:
            if s['stage'] == name:
                return s
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            'schema': REPORT_SCHEMA,
            'scenario': self.scenario,
            'stages': self.stages,
            'bounds': self.bounds,
            'passed': self.passed,
        }


class ScenarioRunner:
    """
    Run the stages of a scenario, write their artefacts and the report

    ```python
    report = ScenarioRunner(scenario, 'out/').run()
    ```
    """

    def __init__(
        self,
        scenario: Scenario,
        out: str | Path | None = None,
        *,
        seedless: bool = False,
        ifexists: IfExists.Choice | None = None,
        table: bool | None = None,
    ):
        """
        Parameters
        ----------
        scenario : Scenario
            Validated scenario
        out : str | Path, optional
            Output directory (default: scenario `out`, then
            `$ROKHLINDIM_OUT`)

        Other Parameters
        ----------------
        seedless : bool
            Reject any random fallback
        ifexists : {'error', 'skip', 'overwrite', 'different'}
            Overrides the scenario policy for existing files
        table : bool
            Live pyout table (default: when stdout is a terminal)
        """
        self.scenario = scenario
        self.root = get_out_path(out or scenario.out)
        self.seedless = seedless
        self.ifexists = ifexists or scenario.ifexists
        if table is None:
            table = sys.stdout.isatty()
        self.table = table

    def init(self):
        """Prepare common stuff"""
        # Printer
        self.out = stage_tab() if self.table else PlainTab()
        # Lazily built objects
        self.ctx = ScenarioContext(self.scenario, seedless=self.seedless)
        # Report
        self.report = RunReport(self.scenario.to_json())
        self.halted: str | None = None

    # ------------------------------------------------------------------
    #   Run all
    # ------------------------------------------------------------------
    def run(self) -> RunReport:
        """Run all stages"""
        self.init()
        with self.out as self.out:
            self._run()
        return self.report

    def _run(self):
        """Must be run from inside the `out` context."""
        for status in self.write('system.json', system_to_json(self.ctx.sys)):
            if status.get('status') == ERROR:
                lg.error(f"system.json: {status.get('message', '')}")

        for name in self.scenario.stages:
            record = self.run_stage(name)
            self.report.stages.append(record)
            if record['status'] != DONE and self.halted is None:
                self.halted = name

        self.report.bounds = self.bounds()
        for status in self.write('report.json', self.report.to_json()):
            self.out({'stage': 'report', **status})
        timings = {k: round(v, 6) for k, v in self.report.timings.items()}
        for _ in self.write('timings.json', timings, ifexists='overwrite'):
            pass
        lg.info(
            f"{self.scenario.name}: {'passed' if self.report.passed else 'failed'}"
        )

    # ------------------------------------------------------------------
    #   Helpers
    # ------------------------------------------------------------------
    def write(self, filename: str, content, *, ifexists=None) -> Action:
        ifexists = ifexists or self.ifexists
        dst = self.root / filename
        if filename.endswith('.csv'):
            return WriteCSV(content, dst, ifexists=ifexists)
        return WriteJSON(content, dst, ifexists=ifexists)

    def bounds(self) -> dict:
        bounds = report_bounds(self.scenario.d, self.ctx.m).to_json()
        s = 0
        if self.scenario.crossed is not None:
            s = self.ctx.inner().s
        bounds['crossed_product'] = crossed_product_bound(
            s, bounds['dim_rok_cyc_bound'], self.ctx.m
        )
        return bounds

    def run_stage(self, name: str) -> dict:
        """Run one stage and return its report record"""
        if self.halted is not None:
            self.out({'stage': name, 'status': SKIP, 'message': f'after {self.halted}'})
            return {'stage': name, 'status': SKIP, 'reason': f'{self.halted} did not pass'}

        self.out({'stage': name, 'status': RUNNING})
        tic = time.perf_counter()
        try:
            result: StageResult = STAGE_FUNCTIONS[name](self.ctx)
            record = {
                'stage': name,
                'status': DONE if result.passed else FAILED,
                'measured': result.measured,
                'budget': result.budget,
            }
            message = result.message
            for filename, content in result.artefacts.items():
                for status in self.write(filename, content):
                    if status.get('status') == ERROR:
                        record['status'] = ERROR
                        record['code'] = 'io'
                        message = status.get('message', '')
        except Exception as e:
            lg.error(str(e) + traceback.format_exc())
            record = {
                'stage': name,
                'status': ERROR,
                'code': getattr(e, 'code', 'internal'),
                'message': str(e),
            }
            witness = getattr(e, 'witness', None)
            if witness is not None:
                record['witness'] = witness
            message = f'{record["code"]}: {e}'
        toc = time.perf_counter() - tic
        self.report.timings[name] = toc

        if record['status'] == FAILED:
            lg.warning(f'{name}: {message}')
        self.out({
            'stage': name,
            'status': record['status'],
            'message': message,
            'elapsed': toc,
        })
        return record
