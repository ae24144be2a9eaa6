import os
import traceback
from enum import Enum as _Enum
from logging import getLogger
from os.path import lexists
from pathlib import Path
from types import GeneratorType
from typing import IO, Callable, Generator, Iterator, Literal

from rokhlindim.actions.file import File
from rokhlindim.utils.digests import get_digest

lg = getLogger(__name__)

__all__ = ['IfExists', 'IfExistsChoice', 'Action']

IfExistsChoice = Literal['skip', 'overwrite', 'different', 'error']
FilenameLike = str | os.PathLike


class IfExists:
    """
    This class both:
    - holds the set of singleton values (as an Enum)
    - defines constant (such as the default value)
    - serves as a context manager to override whichever value was set

    ```python
    action = Action(..., ifexists='different')
    with IfExists('overwrite'):
        action.run()
    ```
    """

    Choice = Literal['skip', 'overwrite', 'different', 'error']

    class Enum(_Enum):
        SKIP = S = 1
        OVERWRITE = O = 2       # noqa: E741
        DIFFERENT = D = 3
        ERROR = E = 4

    # Expose values
    SKIP = Enum.SKIP
    OVERWRITE = Enum.OVERWRITE
    DIFFERENT = Enum.DIFFERENT
    ERROR = Enum.ERROR

    # Set (class attribute) default
    default: Enum = DIFFERENT
    current: Enum | None = None

    @classmethod
    def from_any(cls, x: int | Choice | Enum | None) -> Enum:
        """Return the singleton representation of a value"""
        if x is None:
            return cls.default
        elif isinstance(x, cls.Enum):
            return x
        elif isinstance(x, str):
            if x.lower() not in cls.Choice.__args__:
                raise ValueError(f'Unknown ifexists mode: {x!r}')
            return getattr(cls.Enum, x[0].upper())
        else:
            return cls.Enum(x)

    def __init__(self, value: Choice | Enum) -> None:
        self.value = self.from_any(value)
        self._prev = None

    def __enter__(self) -> None:
        self._prev = type(self).current
        type(self).current = self.value

    def __exit__(self, exc_type, exc_val, exc_tb):
        type(self).current = self._prev
        self._prev = None


class Action:
    """
    This object represents an action that generates a file of a run.

    ```python
    action = Action(
        dst='path/to/report.json',
        action=lambda f: f.write(text),
        digests={'sha256': digest_of_text},
    )
    ```

    If status updates are required, the action should be run by
    iterating over it, with each iteration yielding a status dictionary:
    ```python
    for status in action:
        print(status)
    ```

    If status updates are not needed, the action can simply be called:
    ```python
    action()  # or action.run()
    ```
    """

    def __init__(
        self,
        dst: FilenameLike,
        action: Callable[[IO], GeneratorType | None],
        *,
        mode: str = 'wt',
        ifexists: IfExists.Choice = 'different',
        digests: dict[str, str] | None = None,
    ) -> None:
        """
        Parameters
        ----------
        dst : str | Path
            Output file
        action : Callable[[IO], Generator | None]
            Function that takes an opened file object as input and writes
            out the content. May or may not be a generator.

        Other Parameters
        ----------------
        mode : {'wt', 'wb'}
            Opening mode of the output file
        ifexists : {'error', 'skip', 'overwrite', 'different'}
            Behaviour if destination file already exists
        digests : dict | None
            Digest(s) of the content about to be written.
            Keys are algorithm names (e.g. "sha256") and values are the
            digests.
        """
        self.dst = Path(dst)
        self.action = action
        if mode in ('b', 't', ''):
            mode = 'w' + mode
        if 'b' not in mode and 't' not in mode:
            mode = mode + 't'
        self.mode = mode
        self.digests = dict(digests or {})
        self.ifexists = IfExists.from_any(ifexists)

    def run(self) -> None:
        """Run the action (errors are logged, not raised)"""
        for _ in self:
            pass

    def __call__(self) -> None:
        """Run the action (`run` alias)"""
        return self.run()

    def _should_overwrite(self) -> Generator[dict, None, bool]:
        dst = self.dst
        exists = lexists(dst)

        # Use value set in environment (if there is one)
        ifexists = IfExists.current or self.ifexists
        if IfExists.current:
            lg.debug(f'IfExists from context: {IfExists.current!r}')
        else:
            lg.debug(f'IfExists from object: {self.ifexists!r}')

        if not exists:
            return True

        if ifexists is IfExists.ERROR:
            lg.error(f'File {dst!s} already exists: error')
            raise FileExistsError(f'File {dst!s} already exists')

        elif ifexists is IfExists.SKIP:
            lg.info(f'File {dst!s} already exists: skip')
            yield {'status': 'skipped', 'message': 'already exists'}
            return False

        elif ifexists is IfExists.OVERWRITE:
            lg.info(f'File {dst!s} already exists: overwrite')
            return True

        # different checksum -> different
        if self.digests:
            checkalgo, checksum = next(iter(self.digests.items()))
            if get_digest(dst, checkalgo) != checksum:
                lg.info(f'Checksum of {dst!s} differs; rewriting')
                return True

        # identical -> skip
        lg.info(f'File {dst!s} is identical: skip')
        yield {'status': 'skipped', 'message': 'identical'}
        return False

    def __iter__(self) -> Iterator[dict]:
        try:
            yield from self._iter()
        except Exception as e:
            lg.error(str(e) + traceback.format_exc())
            yield {'status': 'error', 'message': str(e)}

    def _iter(self) -> Iterator[dict]:
        # --------------------------------------------------------------
        # If file exists, select replacement strategy
        # --------------------------------------------------------------
        if not (yield from self._should_overwrite()):
            return

        # --------------------------------------------------------------
        # Perform action
        # --------------------------------------------------------------
        self.dst.parent.mkdir(parents=True, exist_ok=True)
        with File(self.dst, self.mode) as tmp_file:
            text = {'newline': '', 'encoding': 'utf-8'} if 't' in self.mode else {}
            with tmp_file.open(**text) as f:
                action = self.action(f)
                if isinstance(action, GeneratorType):
                    yield from action

        # --------------------------------------------------------------
        # success! -> check what was written
        # --------------------------------------------------------------
        if self.digests:
            checkalgo, checksum = next(iter(self.digests.items()))
            outchecksum = get_digest(self.dst, checkalgo)
            if outchecksum != checksum:
                msg = f'{checkalgo}: output {outchecksum} != {checksum}'
                lg.debug(f'{self.dst!s} is different: {msg}.')
                yield {'checksum': 'differs', 'status': 'error', 'message': msg}
                return
            lg.debug(f'Verified that {self.dst!s} has correct {checkalgo}')

        yield {'status': 'done', 'message': f'wrote {self.dst.name}'}
