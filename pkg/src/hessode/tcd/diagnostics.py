"""Diagnostic records with source spans."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    line: int           # 1-based
    col: int            # 1-based
    length: int = 1

    def shifted(self, line_offset: int) -> "Diagnostic":
        return Diagnostic(self.severity, self.code, self.message,
                          self.line + line_offset, self.col, self.length)


def format_line(diag: Diagnostic, filename: str = "<input>") -> str:
    return (f"{filename}:{diag.line}:{diag.col}: "
            f"{diag.severity.value}[{diag.code}]: {diag.message}")


def to_json(diags, filename: str = "<input>") -> str:
    return json.dumps([
        {
            "file": filename,
            "line": d.line,
            "col": d.col,
            "length": d.length,
            "severity": d.severity.value,
            "code": d.code,
            "message": d.message,
        }
        for d in diags
    ], indent=2)


def has_errors(diags) -> bool:
    return any(d.severity is Severity.ERROR for d in diags)
