"""tiltlab: artificial-language pretraining and frozen-encoder transfer lab."""

__version__ = "0.1.0"
