"""Adaptive structural DBN: RBM stack that grows and shrinks during training."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as __doc__  # noqa: F401
