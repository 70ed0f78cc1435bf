"""Out-of-process transformer scorer for the urdufnd ensemble.

Fine-tunes a pretrained (or locally materialized toy) sequence-classification
backbone on a line-delimited corpus export, then serves class probabilities
over wire protocol 1.0. The service never imports the core package; it
consumes only the documented file format and socket protocol.
"""

__version__ = "1.0.0"

PROTOCOL_VERSION = "1.0"
