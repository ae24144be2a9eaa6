"""
Collection of simple writers wrapped in an Action:

```python
WriteJSON(json: dict, dst: Path): ...           # Write a JSON dictionary
WriteCSV(rows: list[dict], dst: Path): ...      # Write a CSV table
WriteText(text: str, dst: Path): ...            # Write some text
```

The content is serialized once, up front, so that its digest can be
compared with an existing file (`ifexists='different'`).
"""
from pathlib import Path
from typing import Iterable, TextIO

from rokhlindim.actions.action import Action, IfExistsChoice
from rokhlindim.utils.digests import get_content_digest
from rokhlindim.utils.io import dumps_csv, dumps_json

__all__ = ['WriteText', 'WriteJSON', 'WriteCSV']


class WriteText(Action):
    """Write some text"""

    def __init__(
        self,
        text: str,
        dst: str | Path,
        *,
        ifexists: IfExistsChoice = 'different',
    ):
        """
        Parameters
        ----------
        text : str
            Content
        dst : str | Path
            Path to output file

        Other Parameters
        ----------------
        ifexists : {'error', 'skip', 'overwrite', 'different'}
            Behaviour if destination file already exists
        """
        self.text = text
        super().__init__(
            dst=dst,
            action=self.write,
            mode="wt",
            ifexists=ifexists,
            digests={'sha256': get_content_digest(text)},
        )

    def write(self, file: TextIO) -> None:
        file.write(self.text)


class WriteJSON(WriteText):
    """Write a JSON dictionary"""

    def __init__(
        self,
        json: dict,
        dst: str | Path,
        *,
        ifexists: IfExistsChoice = 'different',
        **json_opt,
    ):
        """
        Parameters
        ----------
        json : dict
            JSON dictionary (Fractions and numpy values are converted)
        dst : str | Path
            Path to output JSON file

        Other Parameters
        ----------------
        ifexists : {'error', 'skip', 'overwrite', 'different'}
            Behaviour if destination file already exists
        **json_opt : dict
            JSON options
        """
        self.json = json
        super().__init__(dumps_json(json, **json_opt), dst, ifexists=ifexists)


class WriteCSV(WriteText):
    """Write a CSV table"""

    def __init__(
        self,
        rows: Iterable[dict] | Iterable[list],
        dst: str | Path,
        *,
        header: list[str] | None = None,
        ifexists: IfExistsChoice = 'different',
    ):
        """
        Parameters
        ----------
        rows : list[dict] | list[list]
            Rows of the table
        dst : str | Path
            Path to output CSV file

        Other Parameters
        ----------------
        header : list[str]
            Column names (keys of the first row by default)
        ifexists : {'error', 'skip', 'overwrite', 'different'}
            Behaviour if destination file already exists
        """
        self.rows = list(rows)
        super().__init__(
            dumps_csv(self.rows, header), dst, ifexists=ifexists
        )
