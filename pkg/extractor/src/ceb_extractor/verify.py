"""Structural validation of a CEB file before it is handed downstream."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class ValidationReport:
    dim: int | None = None
    occurrences: int = 0
    vocabulary: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and self.occurrences > 0

    def summary(self) -> str:
        status = "OK" if self.ok else "INVALID"
        lines = [f"{status}: dim={self.dim} occurrences={self.occurrences} "
                 f"vocabulary={self.vocabulary}"]
        lines.extend(self.errors)
        return "\n".join(lines)


def verify_ceb(path, max_errors: int = 10) -> ValidationReport:
    """Check header, per-line dimensionality, numeric finiteness and UTF-8;
    errors name the offending line. Stops after ``max_errors`` problems."""
    report = ValidationReport()
    words: set[str] = set()
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as err:
        report.errors.append(str(err))
        return report
    with fh:
        try:
            header = fh.readline()
            if not header:
                report.errors.append(f"{path}: empty file, expected a CEB header")
                return report
            parts = header.split()
            if len(parts) != 3 or parts[0] != "CEB":
                report.errors.append(f"{path}: line 1: bad header {header.strip()!r}")
                return report
            if parts[1] != "1":
                report.errors.append(f"{path}: line 1: unsupported CEB version {parts[1]!r}")
                return report
            try:
                report.dim = int(parts[2])
            except ValueError:
                report.errors.append(f"{path}: line 1: non-integer dim {parts[2]!r}")
                return report
            if report.dim < 1:
                report.errors.append(f"{path}: line 1: dim must be >= 1")
                return report
            for line_no, line in enumerate(fh, start=2):
                if len(report.errors) >= max_errors:
                    report.errors.append("... further errors suppressed")
                    break
                if not line.strip():
                    continue
                if "\t" not in line:
                    report.errors.append(f"{path}: line {line_no}: missing tab separator")
                    continue
                word, values = line.rstrip("\n").split("\t", 1)
                if not word:
                    report.errors.append(f"{path}: line {line_no}: empty word")
                    continue
                fields = values.split()
                if len(fields) != report.dim:
                    report.errors.append(
                        f"{path}: line {line_no}: expected {report.dim} values, "
                        f"got {len(fields)}"
                    )
                    continue
                bad = False
                for raw in fields:
                    try:
                        value = float(raw)
                    except ValueError:
                        report.errors.append(
                            f"{path}: line {line_no}: non-numeric value {raw!r}"
                        )
                        bad = True
                        break
                    if not math.isfinite(value):
                        report.errors.append(
                            f"{path}: line {line_no}: non-finite value {raw!r}"
                        )
                        bad = True
                        break
                if bad:
                    continue
                report.occurrences += 1
                words.add(word)
        except UnicodeDecodeError as err:
            report.errors.append(f"{path}: not valid UTF-8: {err}")
    report.vocabulary = len(words)
    if report.occurrences == 0 and not report.errors:
        report.errors.append(f"{path}: no occurrences after the header")
    return report
