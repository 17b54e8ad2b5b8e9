"""ctxsum: document-context summarization toolkit.

Builds per-document context vectors from creator metadata and consumer
behavior, scores and extracts sentences with them, conditions LSTM
summarizers on them, and compares contextual vs. non-contextual extractive
and abstractive summarizers plus classical baselines under one evaluation
harness.
"""

__version__ = "0.1.0"

from . import (baselines, checkpoint, context, corpus, embed, experiment,
               metrics, models, neural, report, synth)

__all__ = ["corpus", "embed", "context", "neural", "models", "baselines",
           "metrics", "checkpoint", "synth", "experiment", "report",
           "__version__"]
