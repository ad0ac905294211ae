"""Figure rendering for monitored-chain simulation artifacts."""

__version__ = "0.1.0"

from .render import FigureSpec, render
from .schemas import ManifestMismatchError, SchemaError
