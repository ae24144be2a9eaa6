import logging

logging.basicConfig(format='%(levelname)s | %(message)s', level=15)

# register commands
from . import scenario     # noqa: E402, F401
