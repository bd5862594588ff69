"""Contextual-embedding export in the CEB interchange format.

Runs a pretrained BERT-style encoder over a labeled corpus, merges wordpiece
vectors back into word-level vectors by averaging, and writes one CEB line
per word occurrence for the downstream distillation pipeline.
"""

__version__ = "0.1.0"
