# File: src/exceptions.py

"""
Custom exception classes for the image edit request (IER) parser.

This module defines a hierarchy of custom exceptions to allow for more specific
and robust error handling throughout the package, distinguishing between
annotation problems, embedding file errors, optimisation failures, modeling
problems, evaluation issues and configuration errors.
"""

from enum import Enum


class IerError(Exception):
    """Base class for exceptions in this package."""
    pass

# --- Configuration Errors ---
class ConfigError(IerError):
    """Raised for general configuration loading/parsing issues."""
    pass

class ConfigFileNotFoundError(IerError, FileNotFoundError):
    """Raised when the configuration file cannot be found."""
    pass

# --- Annotation Errors ---
class UnknownLabelError(IerError, ValueError):
    """Raised when an entity or action name matches no canonical value or alias."""
    def __init__(self, raw, kind="entity label"):
        self.raw = raw
        self.kind = kind
        super().__init__(f"Unknown {kind}: {raw!r}")

class InvalidAnnotationError(IerError, ValueError):
    """Raised when a token, span or annotation tree violates its invariants."""
    pass


class ParseErrorCategory(str, Enum):
    """Why a line of bracketed annotation was rejected."""
    UNBALANCED_BRACKET = "UnbalancedBracket"
    UNKNOWN_LABEL = "UnknownLabel"
    MULTIPLE_ACTIONS = "MultipleActions"
    EMPTY_NODE = "EmptyNode"
    MULTIPLE_ROOTS = "MultipleRoots"
    MALFORMED_NODE = "MalformedNode"
    MISPLACED_NODE = "MisplacedNode"
    MALFORMED_RECORD = "MalformedRecord"
    DUPLICATE_ID = "DuplicateId"


class AnnotationParseError(IerError, ValueError):
    """
    Raised (or collected) for a rejected annotation line.

    Carries the 1-based line number, the 0-based character column and the
    0-based offset into the whitespace token stream where the problem was found.
    """
    def __init__(self, category, message, line=None, column=None, token_offset=None):
        self.category = ParseErrorCategory(category)
        self.message = message
        self.line = line
        self.column = column
        self.token_offset = token_offset
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"col {column}")
        if token_offset is not None:
            where.append(f"token {token_offset}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{self.category.value}: {message}")

    def at_line(self, line):
        """Returns a copy of this error stamped with a line number."""
        return AnnotationParseError(self.category, self.message, line=line,
                                    column=self.column, token_offset=self.token_offset)

    def to_dict(self):
        return {
            "line": self.line, "column": self.column, "token_offset": self.token_offset,
            "category": self.category.value, "message": self.message,
        }

# --- Data and File Errors ---
class CorpusDecodeError(IerError, ValueError):
    """Raised when a corpus stream is not valid UTF-8."""
    pass

class EmbeddingDimensionError(IerError, ValueError):
    """Raised when a word-vector line has a different arity than the first line."""
    pass

class EmbeddingFormatError(IerError, ValueError):
    """Raised when a word-vector value cannot be read as a finite real."""
    pass

# --- Optimisation Errors ---
class InvalidOptimizerConfigError(IerError, ValueError):
    """Raised when L-BFGS settings violate 0 < c1 < c2 < 1 or m >= 1."""
    pass

class NonFiniteObjectiveError(IerError, ArithmeticError):
    """Raised when an objective value or gradient is NaN or infinite."""
    pass

# --- Modeling Errors ---
class DegenerateDataError(IerError, ValueError):
    """Raised when a classifier is trained on fewer than two distinct labels."""
    pass

class EmptyCorpusError(IerError, ValueError):
    """Raised when a learner receives no training sequences."""
    pass

class EmptyAfterFilterError(IerError, ValueError):
    """Raised when filtering leaves no executable utterances to split."""
    pass

class UnknownTagError(IerError, ValueError):
    """Raised when a gold tag is outside the model's tag set."""
    pass

class EmptyInputError(IerError, ValueError):
    """Raised when prediction is requested for an empty utterance."""
    pass

class ModelFileNotFoundError(IerError, FileNotFoundError):
    """Raised when a specific model file cannot be found."""
    pass

class ModelLoadError(IerError):
    """Raised when a model file cannot be loaded or deserialized."""
    pass

# --- Evaluation Errors ---
class LengthMismatchError(IerError, ValueError):
    """Raised when gold and predicted sequences differ in length."""
    pass

class AgreementUndefinedError(IerError, ArithmeticError):
    """Raised when Krippendorff's alpha is undefined (no expected disagreement)."""
    pass
