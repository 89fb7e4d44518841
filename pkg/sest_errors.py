"""
Exception hierarchy shared by every SEST module.

Library code raises these; `sest_cli.py` catches `SestError` and turns it
into a one-line diagnostic plus the exit code stored on the class.
"""

from typing import Optional


class SestError(Exception):
    """Base class. exit_code is what the CLI returns for this failure."""

    exit_code = 1


class UsageError(SestError):
    exit_code = 2


class ParseError(SestError):
    """Malformed bracketed tree or CoNLL-U input."""

    def __init__(self, message: str, offset: Optional[int] = None, line: Optional[int] = None):
        self.offset = offset
        self.line = line
        where = ""
        if offset is not None:
            where = f" (byte offset {offset})"
        elif line is not None:
            where = f" (line {line})"
        super().__init__(f"{message}{where}")


class StructuralError(SestError):
    """Well-formed input that does not describe a valid tree (cycles, multiple roots)."""


class ArgumentError(SestError):
    pass


class ShapeError(SestError):
    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        shown = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"shape mismatch in {op}: {shown}")


class NumericError(SestError):
    pass


class StateError(SestError):
    pass


class DataError(SestError):
    pass


class LoadError(SestError):
    pass


class TrainingError(SestError):
    def __init__(self, message: str, epoch: int, example_id: str):
        self.epoch = epoch
        self.example_id = example_id
        super().__init__(f"{message} (epoch {epoch}, example {example_id})")
