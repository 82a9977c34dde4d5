"""Aerial scene decomposition, footprint planning and stitching."""

try:
    from ._birdplan import *  # noqa: F401,F403
    from ._birdplan import __doc__  # noqa: F401
except ImportError:  # running against a bare build tree
    from _birdplan import *  # noqa: F401,F403
