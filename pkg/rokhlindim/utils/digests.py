# Adapted from `dandi.support.digest`
# Apache License Version 2.0
import hashlib
from logging import getLogger
from pathlib import Path

lg = getLogger(__name__)

__all__ = ['get_digest', 'get_content_digest']

BLOCKSIZE = 1 << 16


def get_digest(filepath: str | Path, digest: str = "sha256") -> str:
    """
    Digest of a file, read by blocks

    Parameters
    ----------
    filepath : str | Path
        File whose content is hashed
    digest : str
        Name of a `hashlib` algorithm

    Returns
    -------
    str
        Hexadecimal digest
    """
    lg.debug(f"{digest} of {filepath}")
    h = hashlib.new(digest)
    with open(filepath, "rb") as f:
        for block in iter(lambda: f.read(BLOCKSIZE), b""):
            h.update(block)
    return h.hexdigest()


def get_content_digest(content: str | bytes, digest: str = "sha256") -> str:
    """Digest of an in-memory content (text is utf-8 encoded)"""
    if isinstance(content, str):
        content = content.encode('utf-8')
    return hashlib.new(digest, content).hexdigest()
