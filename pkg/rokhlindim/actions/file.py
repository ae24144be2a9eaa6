from logging import getLogger
from pathlib import Path
from shutil import rmtree
from typing import IO

from fasteners import InterProcessReaderWriterLock

lg = getLogger(__name__)

__all__ = ['File']


class File:
    """
    An output file of a run.

    A writer lock ensures that two runs do not write the same report
    concurrently. During writing, a temporary file is created first,
    and only renamed to its final name if everything completed properly.

    ```python
    # Protect file for writing and open a file-object
    with File(filename, "wt") as file_ref:
        with file_ref.open() as f:
            f.write(text)

    # Write through a path
    with File(filename, "w") as file_ref:
        subroutine_write(file_ref.safename)
    ```

    # Modes

    * `'r'` : no protection, the file is used in place
    * `'w'` : write-protected, through a temporary file
    * `'b'` / `'t'` : binary / text mode of opened file-objects
    """

    # Derived from `dandi.download.DownloadDirectory`
    # https://github.com/dandi/dandi-cli/blob/master/dandi/download.py
    # Apache License Version 2.0

    def __init__(self, filename: str | Path, mode: str = 'r') -> None:
        """
        Parameters
        ----------
        filename : str | Path
            Output filename
        mode : {'r', 'w', 'b', 't'}
            Protection & opening mode.
        """
        self.mode = mode
        self.filename: Path = Path(filename)
        self.tempdir: Path = self.filename.with_name(
            self.filename.name + '.tmp'
        )
        self.tempname: Path = self.tempdir / self.filename.name
        self.lockname: Path = self.tempdir / 'lock'
        self.safename: Path | None = None
        self.lock: InterProcessReaderWriterLock | None = None
        self.writable = 'w' in mode or 'a' in mode or '+' in mode

    def open(self, mode: str | None = None, **kwargs) -> IO:
        """Open the protected file (the temporary file when writing)"""
        if self.safename is None:
            raise ValueError('File.open() called outside of context manager')
        return open(self.safename, mode or self.mode, **kwargs)

    def __enter__(self) -> "File":
        if self.writable:
            self.tempdir.mkdir(parents=True, exist_ok=True)
            self.tempname.unlink(missing_ok=True)
            self.lock = InterProcessReaderWriterLock(str(self.lockname))
            if not self.lock.acquire_write_lock(blocking=False):
                self.lock = None
                raise RuntimeError(
                    f'Could not acquire write lock for {self.filename}'
                )
            self.safename = self.tempname
        else:
            self.safename = self.filename
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        # The temporary file only replaces the output if the context was
        # not interrupted by an exception
        try:
            if self.writable and exc_type is None and self.tempname.exists():
                self.tempname.replace(self.filename)
        finally:
            if self.lock is not None and self.writable:
                try:
                    self.lock.release_write_lock()
                except RuntimeError:
                    # we were not owning the lock
                    pass
            if self.writable and self.tempdir.exists():
                rmtree(self.tempdir)
            self.lock = None
            self.safename = None

