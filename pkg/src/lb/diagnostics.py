"""Source spans, diagnostic records and their rendering.

Every parse or analysis problem is reported as a Diagnostic with a stable
code, so tests and tooling can assert on the exact rule that fired rather
than on message wording.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass
from enum import Enum


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


# Stable diagnostic codes.  Parse-level codes abort with no model; analysis
# codes are aggregated and reported together.
E_SYNTAX = "E_SYNTAX"
E_DUPLICATE_DECL = "E_DUPLICATE_DECL"
E_UNKNOWN_KEYWORD = "E_UNKNOWN_KEYWORD"
E_BAD_CHANNEL_EXPR = "E_BAD_CHANNEL_EXPR"
E_BAD_QUANTIFIER = "E_BAD_QUANTIFIER"
E_BAD_ACTION = "E_BAD_ACTION"

E_NO_NODES_AXIOM = "E_NO_NODES_AXIOM"
E_MALFORMED_PARTITION = "E_MALFORMED_PARTITION"
E_NO_TOPOLOGY = "E_NO_TOPOLOGY"
E_MISSING_BUILTIN = "E_MISSING_BUILTIN"
E_UNDECLARED_REF = "E_UNDECLARED_REF"
E_UNKNOWN_ANNOTATION = "E_UNKNOWN_ANNOTATION"
E_UNTYPED_VARIABLE = "E_UNTYPED_VARIABLE"
E_UNTYPED_CONSTANT = "E_UNTYPED_CONSTANT"
E_UNINITIALISED = "E_UNINITIALISED"
E_BAD_INIT = "E_BAD_INIT"
E_NO_DONE_STATE = "E_NO_DONE_STATE"

E_NO_PROC_PARAM = "E_NO_PROC_PARAM"
E_MULTI_PROC_PARAM = "E_MULTI_PROC_PARAM"
E_NO_PC_GUARD = "E_NO_PC_GUARD"
E_MULTI_PC_GUARD = "E_MULTI_PC_GUARD"
E_BAD_PC_GUARD = "E_BAD_PC_GUARD"
E_NO_TYPING_GUARD = "E_NO_TYPING_GUARD"
E_MULTI_TYPING_GUARD = "E_MULTI_TYPING_GUARD"
E_NONLOCAL_REF = "E_NONLOCAL_REF"
E_FOREIGN_ASSIGN = "E_FOREIGN_ASSIGN"
E_MULTI_CHANNEL_ACTION = "E_MULTI_CHANNEL_ACTION"
E_AMBIGUOUS_KIND = "E_AMBIGUOUS_KIND"
E_CHANNEL_ORIENTATION = "E_CHANNEL_ORIENTATION"
E_RECV_GENERAL_GUARD = "E_RECV_GENERAL_GUARD"
E_BAD_RECEIVE_SHAPE = "E_BAD_RECEIVE_SHAPE"
E_UNSUPPORTED_HISTORY = "E_UNSUPPORTED_HISTORY"

W_DONE_EVENT = "W_DONE_EVENT"
W_UNKNOWN_CONFIG_KEY = "W_UNKNOWN_CONFIG_KEY"


@dataclass(frozen=True)
class SourceSpan:
    """Location of a token or construct in one source file.

    line and column are 1-based; length is at least 1.
    """

    file: str
    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    span: SourceSpan

    def render(self, color: bool = False) -> str:
        sev = self.severity.value
        if color:
            tint = "\033[31m" if self.severity is Severity.ERROR else "\033[33m"
            sev = f"{tint}{sev}\033[0m"
        return f"{self.span}: {sev}: {self.code}: {self.message}"

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "code": self.code,
            "message": self.message,
            "file": self.span.file,
            "line": self.span.line,
            "column": self.span.column,
        }


def error(code: str, message: str, span: SourceSpan) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, message, span)


def warning(code: str, message: str, span: SourceSpan) -> Diagnostic:
    return Diagnostic(Severity.WARNING, code, message, span)


def diagnostics_to_json(diags: list[Diagnostic]) -> str:
    return json.dumps([d.to_dict() for d in diags], indent=2, sort_keys=True)


def use_color(stream=None) -> bool:
    """Resolve the LB_COLOR policy (auto, always, never) for a stream."""
    mode = os.environ.get("LB_COLOR", "auto")
    if mode == "always":
        return True
    if mode == "never":
        return False
    stream = stream if stream is not None else sys.stderr
    return hasattr(stream, "isatty") and stream.isatty()


class ParseFailure(Exception):
    """Raised when parsing fails; no model is produced."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(d.message for d in diagnostics))


class AnalysisFailure(Exception):
    """Raised when analysis rejects a model; carries all diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(d.message for d in diagnostics))

    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]
