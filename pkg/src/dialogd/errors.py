"""Error taxonomy shared by every layer.

Each error carries a stable ``code`` string (what goes on the wire) and the
HTTP status the server maps it to. Parse errors additionally carry a 1-based
character offset into the offending expression text.
"""

from __future__ import annotations


class DialogdError(Exception):
    """Base class for all structured errors."""

    code = "Error"
    http_status = 400

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_json(self) -> dict:
        return {"error": self.code, "message": self.message}


# -- value conversion ------------------------------------------------------

class ConversionError(DialogdError):
    code = "ConversionError"


# -- storage / DML ---------------------------------------------------------

class UnknownTable(DialogdError):
    code = "UnknownTable"
    http_status = 404


class UnknownRow(DialogdError):
    code = "UnknownRow"
    http_status = 404


class ArityMismatch(DialogdError):
    code = "ArityMismatch"


class TypeMismatch(DialogdError):
    code = "TypeMismatch"


class NullViolation(DialogdError):
    code = "NullViolation"
    http_status = 409


class LengthViolation(DialogdError):
    code = "LengthViolation"
    http_status = 409


class UniqueViolation(DialogdError):
    code = "UniqueViolation"
    http_status = 409


class ForeignKeyViolation(DialogdError):
    code = "ForeignKeyViolation"
    http_status = 409


class RestrictViolation(DialogdError):
    code = "RestrictViolation"
    http_status = 409


class EngineClosed(DialogdError):
    code = "EngineClosed"
    http_status = 500


class StorageCorrupt(DialogdError):
    code = "StorageCorrupt"
    http_status = 500


# -- DDL -------------------------------------------------------------------

class DuplicateTable(DialogdError):
    code = "DuplicateTable"
    http_status = 409


class DuplicateColumn(DialogdError):
    code = "DuplicateColumn"
    http_status = 409


class UnknownColumn(DialogdError):
    code = "UnknownColumn"
    http_status = 404


class TableReferenced(DialogdError):
    code = "TableReferenced"
    http_status = 409


class NotNullOnPopulated(DialogdError):
    code = "NotNullOnPopulated"
    http_status = 409


class TypeMismatchFK(DialogdError):
    code = "TypeMismatchFK"
    http_status = 409


class TargetNotKey(DialogdError):
    code = "TargetNotKey"
    http_status = 409


class ConstraintInUse(DialogdError):
    code = "ConstraintInUse"
    http_status = 409


class DuplicateConstraint(DialogdError):
    code = "DuplicateConstraint"
    http_status = 409


class UnknownConstraint(DialogdError):
    code = "UnknownConstraint"
    http_status = 404


class InvalidIdentifier(DialogdError):
    code = "InvalidIdentifier"


class InvalidSchemaChange(DialogdError):
    code = "InvalidSchemaChange"


# -- expressions -----------------------------------------------------------

class ParseError(DialogdError):
    """Syntax error in a filter or order expression.

    ``offset`` is the 1-based character position of the offending input.
    """

    code = "ParseError"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset

    def to_json(self) -> dict:
        return {"error": self.code, "message": self.message, "offset": self.offset}


class UnknownField(DialogdError):
    code = "UnknownField"


class ExprTypeError(DialogdError):
    # wire code kept as the bare name clients expect
    code = "TypeError"


class LikeOnNonText(DialogdError):
    code = "LikeOnNonText"


# -- dialog / server -------------------------------------------------------

class PageTooLarge(DialogdError):
    code = "PageTooLarge"


class InvalidRequest(DialogdError):
    code = "InvalidRequest"


class PortInUse(DialogdError):
    code = "PortInUse"
    http_status = 500


class SeedSchemaInvalid(DialogdError):
    code = "SeedSchemaInvalid"
    http_status = 500
