"""
Scenario files
==============

A scenario is the single JSON artefact that describes a run:

```json
{
    "schema": "rokhlindim.scenario/1",
    "name": "z64",
    "system": {"builder": "cyclic", "sizes": [64]},
    "n": 4,
    "d": 0,
    "towers": {"L_small": 1, "n_param": 2},
    "crossed": {"n": 16, "N": 2, "family": "tiling"},
    "stages": ["free-check", "marker", "cover", "towers", "verify", "crossed"]
}
```

Unknown keys are rejected at every level.
"""
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from logging import getLogger
from pathlib import Path
from typing import Literal, Sequence

from rokhlindim.actions import IfExists
from rokhlindim.errors import ParameterError
from rokhlindim.utils.io import read_json
from rokhlindim.utils.ui import as_fraction, fraction_str

lg = getLogger(__name__)

__all__ = [
    'SCHEMA',
    'STAGES',
    'StageName',
    'MarkerKind',
    'TowerParams',
    'CrossedParams',
    'Scenario',
    'load_scenario',
]

SCHEMA = 'rokhlindim.scenario/1'

StageName = Literal['free-check', 'marker', 'cover', 'towers', 'verify', 'crossed']
STAGES: tuple[str, ...] = StageName.__args__

MarkerKind = Literal['controlled', 'tiling']
InnerKind = Literal['identity', 'partition']


def _check_keys(obj: dict, allowed: Sequence[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ParameterError(f'{where}: expected a JSON object')
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ParameterError(f'{where}: unknown key(s) {unknown}')


def _int(obj: dict, key: str, default=None, *, minimum: int | None = None) -> int:
    value = obj.get(key, default)
    if value is None:
        raise ParameterError(f'Missing key {key!r}')
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParameterError(f'{key} must be an integer, got {value!r}')
    if minimum is not None and value < minimum:
        raise ParameterError(f'{key} must be >= {minimum}, got {value}')
    return value


@dataclass(frozen=True)
class TowerParams:
    """Parameters of the tower synthesis (big cover of side `8 L n`)"""

    L_small: int = 1
    n_param: int = 1
    delta_bump: Fraction = Fraction(0)

    @property
    def cover_side(self) -> int:
        return 8 * self.L_small * self.n_param

    @classmethod
    def from_json(cls, obj: dict) -> "TowerParams":
        _check_keys(obj, ('L_small', 'n_param', 'delta_bump'), 'towers')
        try:
            delta_bump = as_fraction(obj.get('delta_bump', 0))
        except (TypeError, ValueError, ZeroDivisionError) as e:
            raise ParameterError(f'towers.delta_bump: {e}')
        if delta_bump < 0:
            raise ParameterError('towers.delta_bump must be >= 0')
        return cls(
            _int(obj, 'L_small', 1, minimum=1),
            _int(obj, 'n_param', 1, minimum=1),
            delta_bump,
        )

    def to_json(self) -> dict:
        return {
            'L_small': self.L_small,
            'n_param': self.n_param,
            'delta_bump': fraction_str(self.delta_bump),
        }


@dataclass(frozen=True)
class CrossedParams:
    """
    Parameters of the crossed-product stage

    `family` is `'tiling'` (indicator towers of the exact tiling marker
    of side `2n`), `'towers'` (the normalized family of the towers stage,
    whose `L_small` must equal `2n`) or the path of a `towers.json` file.
    """

    n: int
    N: int
    family: str = 'tiling'
    test_ops: str = 'unit'
    inner: InnerKind = 'identity'
    cell_width: int = 1
    delta_floor: float = 0.0
    seed: int = 0
    jobs: int = 1

    @classmethod
    def from_json(cls, obj: dict) -> "CrossedParams":
        _check_keys(obj, tuple(cls.__dataclass_fields__), 'crossed')
        n = _int(obj, 'n', minimum=1)
        N = _int(obj, 'N', minimum=1)
        if N > n:
            raise ParameterError(f'crossed.N must not exceed crossed.n, got N={N} > n={n}')
        test_ops = obj.get('test_ops', 'unit')
        if test_ops not in ('unit', 'ramp', 'random', 'sum'):
            raise ParameterError(f'Unknown test operator kind: {test_ops!r}')
        inner = obj.get('inner', 'identity')
        if inner not in InnerKind.__args__:
            raise ParameterError(f'Unknown inner approximation: {inner!r}')
        family = obj.get('family', 'tiling')
        if not isinstance(family, str) or not family:
            raise ParameterError('crossed.family must be a non-empty string')
        delta_floor = float(obj.get('delta_floor', 0.0))
        if delta_floor < 0:
            raise ParameterError('crossed.delta_floor must be >= 0')
        return cls(
            n, N, family, test_ops, inner,
            _int(obj, 'cell_width', 1, minimum=1),
            delta_floor,
            _int(obj, 'seed', 0),
            _int(obj, 'jobs', 1, minimum=1),
        )

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Scenario:
    """
    A validated scenario

    Attributes
    ----------
    name : str
        Scenario name (used in reports)
    system : dict
        System description, as accepted by `dynsys.load_system`
    n : int
        Tower side of the marker and cover stages
    d : int
        Dimension parameter
    marker : {'controlled', 'tiling'}
        Marker construction
    towers : TowerParams | None
        Tower synthesis parameters (stages `towers` and `verify`)
    crossed : CrossedParams | None
        Crossed-product parameters (stage `crossed`)
    stages : tuple[str]
        Stages to run, in pipeline order
    out : str | None
        Output directory
    ifexists : {'skip', 'overwrite', 'different', 'error'}
        Policy for existing output files
    """

    name: str
    system: dict
    n: int
    d: int = 0
    marker: MarkerKind = 'controlled'
    towers: TowerParams | None = None
    crossed: CrossedParams | None = None
    stages: tuple[str, ...] = STAGES
    out: str | None = None
    ifexists: str = 'different'

    KEYS = (
        'schema', 'name', 'system', 'n', 'd', 'marker', 'towers',
        'crossed', 'stages', 'out', 'ifexists',
    )

    @classmethod
    def from_json(cls, obj: dict) -> "Scenario":
        _check_keys(obj, cls.KEYS, 'scenario')
        schema = obj.get('schema', SCHEMA)
        if schema != SCHEMA:
            raise ParameterError(f'Unsupported scenario schema {schema!r}')
        system = obj.get('system')
        if not isinstance(system, dict):
            raise ParameterError('scenario.system must be a JSON object')
        marker = obj.get('marker', 'controlled')
        if marker not in MarkerKind.__args__:
            raise ParameterError(f'Unknown marker kind: {marker!r}')
        ifexists = obj.get('ifexists', 'different')
        if ifexists not in IfExists.Choice.__args__:
            raise ParameterError(f'Unknown ifexists mode: {ifexists!r}')
        towers = obj.get('towers')
        crossed = obj.get('crossed')
        scenario = cls(
            name=str(obj.get('name', 'scenario')),
            system=dict(system),
            n=_int(obj, 'n', minimum=1),
            d=_int(obj, 'd', 0, minimum=0),
            marker=marker,
            towers=None if towers is None else TowerParams.from_json(towers),
            crossed=None if crossed is None else CrossedParams.from_json(crossed),
            out=obj.get('out'),
            ifexists=ifexists,
        )
        return scenario.with_stages(obj.get('stages'))

    def with_stages(self, stages: Sequence[str] | str | None) -> "Scenario":
        """Restrict the scenario to a subset of stages (pipeline order)"""
        if stages is None:
            stages = STAGES
        if isinstance(stages, str):
            stages = [s for s in stages.split(',') if s]
        stages = [s.strip() for s in stages]
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise ParameterError(f'Unknown stage(s) {unknown}; known: {list(STAGES)}')
        if not stages:
            raise ParameterError('No stage selected')
        selected = tuple(s for s in STAGES if s in stages)
        if 'crossed' in selected and self.crossed is None:
            raise ParameterError("Stage 'crossed' needs a 'crossed' section")
        return replace(self, stages=selected)

    def to_json(self) -> dict:
        obj = {
            'schema': SCHEMA,
            'name': self.name,
            'system': dict(self.system),
            'n': self.n,
            'd': self.d,
            'marker': self.marker,
        }
        if self.towers is not None:
            obj['towers'] = self.towers.to_json()
        if self.crossed is not None:
            obj['crossed'] = self.crossed.to_json()
        obj['stages'] = list(self.stages)
        obj['ifexists'] = self.ifexists
        return obj

    @property
    def tower_params(self) -> TowerParams:
        return self.towers or TowerParams()


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file"""
    path = Path(path)
    lg.debug(f'load scenario {path}')
    try:
        obj = read_json(path)
    except ValueError as e:
        raise ParameterError(f'{path.name} is not valid JSON: {e}')
    return Scenario.from_json(obj)
