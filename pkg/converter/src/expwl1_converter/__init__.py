"""One-shot converter from the pickled paired-graph benchmark to the
workbench's JSONL pair format."""

from .convert import ConversionError, ConversionManifest, convert

__version__ = "0.1.0"
