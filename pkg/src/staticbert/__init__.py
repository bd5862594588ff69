"""Static word embeddings distilled from contextual encoders, and the
classifiers that consume them.

Subpackages and modules:

- ``corpus``: labeled-text ingestion, tokenization, vocabulary, dataset
  balance, stratified fold planning.
- ``distill``: contextual-to-static embedding distillation (mean pooling),
  word-vector file IO, embedding-matrix assembly.
- ``engine``: minimal double-precision reverse-mode compute core (layers,
  additive attention, loss, optimizer, gradient checking).
- ``models``: the six classifier architectures built from engine layers.
- ``evaluate``: training loop with early stopping, stratified k-fold
  protocol, confusion-derived metrics, comparison reports.
- ``cli``: the ``staticbert`` command-line entry point.
"""

__version__ = "0.1.0"
