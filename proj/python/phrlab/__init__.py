"""Policy horizon regression lab: Python bindings over the C++ core."""

from phrlab._core import *  # noqa: F401,F403
from phrlab._core import __doc__  # noqa: F401
