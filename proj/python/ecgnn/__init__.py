"""EC-GNN: event-correlated graph neural networks over caption, video and
question modalities, with planted-signal synthetic tasks.

The heavy lifting lives in the compiled module; this package re-exports it.
"""

try:
    from ._core import *  # noqa: F401,F403  (installed layout)
    from . import _core as core  # noqa: F401
except ImportError:  # development layout: _core on PYTHONPATH from the build tree
    from _core import *  # noqa: F401,F403
    import _core as core  # noqa: F401

__all__ = [name for name in dir(core) if not name.startswith("_")]
