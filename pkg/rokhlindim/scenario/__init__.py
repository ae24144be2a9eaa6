from .scenario import *     # noqa: F401, F403
from .stages import *       # noqa: F401, F403
from .runner import *       # noqa: F401, F403
from . import commands      # noqa: F401
