"""Score-based diffusion speech enhancement (C++ core)."""

from ._diffse import *  # noqa: F401,F403
from ._diffse import __doc__  # noqa: F401
