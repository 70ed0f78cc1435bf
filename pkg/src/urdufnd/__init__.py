"""Corpus-to-verdict toolkit for Urdu fake-news detection.

Harmonizes heterogeneous news sources into one binary-labeled corpus,
preprocesses Urdu text, extracts lexical/n-gram/TF-IDF features, trains
classical classifiers, and fuses them with external scorers by majority vote.
"""

__version__ = "1.0.0"

from .corpus import Label, NewsRecord  # noqa: F401
