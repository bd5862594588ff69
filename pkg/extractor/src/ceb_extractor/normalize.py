"""Word normalization, kept in lockstep with the consuming pipeline.

The distillation side tokenizes with exactly these rules and tags them
``norm-v1``; the manifest written next to every CEB file records the tag so
a version drift is detectable. Do not change one side without the other.
"""

from __future__ import annotations

import re

NORMALIZATION_VERSION = "norm-v1"

# Unicode letters, digits and the ASCII apostrophe survive; underscore and
# everything else becomes a space.
_NON_TOKEN = re.compile(r"[^\w']|_")


def normalize_and_tokenize(text: str) -> list[str]:
    cleaned = _NON_TOKEN.sub(" ", text.lower())
    return cleaned.split()
