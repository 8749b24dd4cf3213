"""streamci: continuous integration for data-centric pipelines on streams."""

from .workspace import Workspace

__version__ = "0.1.0"

__all__ = ["Workspace", "__version__"]
