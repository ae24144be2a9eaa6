from logging import getLogger
from pathlib import Path
from typing import Iterable, Literal

from rokhlindim.actions import IfExists
from rokhlindim.cli import app
from rokhlindim.errors import RokhlinError
from rokhlindim.scenario.runner import ScenarioRunner
from rokhlindim.scenario.scenario import StageName, load_scenario
from rokhlindim.utils.log import setup_filelog

lg = getLogger(__name__)

LogLevel = Literal['debug', 'info', 'warning', 'error']


def _execute(
    scenario: str | Path,
    stages: Iterable[str] | str | None,
    out: str | Path | None,
    seedless: bool,
    ifexists: IfExists.Choice | None,
    log: str | None,
    log_level: LogLevel | None,
) -> int:
    setup_filelog(log, log_level)
    try:
        parsed = load_scenario(scenario)
        if stages:
            parsed = parsed.with_stages(stages)
        report = ScenarioRunner(
            parsed, out, seedless=seedless, ifexists=ifexists
        ).run()
    except RokhlinError as e:
        lg.error(f'{e.code}: {e}')
        return 1
    except OSError as e:
        lg.error(str(e))
        return 1
    return 0 if report.passed else 1


@app.command(name="run")
def run(
    *,
    scenario: str,
    out: str | None = None,
    stages: Iterable[StageName] | None = None,
    seedless: bool = False,
    ifexists: IfExists.Choice | None = None,
    log: str | None = None,
    log_level: LogLevel | None = None,
) -> int:
    """
    Run the stages of a scenario and write the report

    Parameters
    ----------
    scenario : str
        Path to the scenario file
    out : str
        Output directory (default: `$ROKHLINDIM_OUT` or `./rokhlindim-out`)
    stages : [list of] {"free-check", "marker", "cover", "towers", "verify", "crossed"}
        Only run these stages (default: those of the scenario)
    seedless : bool
        Reject any nondeterministic fallback
    ifexists : {"error", "skip", "overwrite", "different"}
        Behaviour when an output file already exists
    log : str
        Path to log file
    log_level : {"debug", "info", "warning", "error"}
        Level of the package logger
    """
    return _execute(scenario, stages, out, seedless, ifexists, log, log_level)


def _stage_command(stage: str, summary: str):

    def command(
        *,
        scenario: str,
        out: str | None = None,
        seedless: bool = False,
        ifexists: IfExists.Choice | None = None,
        log: str | None = None,
        log_level: LogLevel | None = None,
    ) -> int:
        return _execute(
            scenario, [stage], out, seedless, ifexists, log, log_level
        )

    command.__name__ = stage.replace('-', '_')
    command.__doc__ = f"""
    {summary}

    Parameters
    ----------
    scenario : str
        Path to the scenario file
    out : str
        Output directory (default: `$ROKHLINDIM_OUT` or `./rokhlindim-out`)
    seedless : bool
        Reject any nondeterministic fallback
    ifexists : {{"error", "skip", "overwrite", "different"}}
        Behaviour when an output file already exists
    log : str
        Path to log file
    log_level : {{"debug", "info", "warning", "error"}}
        Level of the package logger
    """
    app.command(command, name=stage)
    return command


free_check = _stage_command(
    'free-check', 'Audit freeness at the radius needed by the marker')
marker = _stage_command(
    'marker', 'Build and verify a controlled marker')
cover = _stage_command(
    'cover', 'Build and verify the Rokhlin cover of a marker')
towers = _stage_command(
    'towers', 'Synthesise and normalize tower functions')
verify = _stage_command(
    'verify', 'Measure the relation defects of the tower functions')
crossed = _stage_command(
    'crossed', 'Measure the approximation defect in the crossed product')
