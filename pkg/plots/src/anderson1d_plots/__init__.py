"""Figure scripts over the anderson1d CLI's CSV outputs."""

from .csvio import SCHEMAS, SchemaError, read_table
from .render import RENDERERS

__version__ = "0.1.0"
