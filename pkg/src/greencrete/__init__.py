"""Generative design and impact screening of concrete mixes."""

__version__ = "0.1.0"

CHECKPOINT_FORMAT_VERSION = "1"
