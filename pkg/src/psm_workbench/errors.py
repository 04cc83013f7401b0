"""Exception hierarchy shared across the workbench.

Every error carries a machine-readable ``code`` so the HTTP layer and the
CLI can map failures to stable identifiers without parsing messages.
"""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base class for all workbench failures."""

    code = "workbench_error"


class SchemaError(WorkbenchError):
    """Dataset-level structural problem: missing column, duplicate ids,
    non-binary treatment, degenerate declarations."""

    code = "schema_error"


class RowError(WorkbenchError):
    """Cell-level ingestion problem, annotated with the offending data row
    (1-based, header excluded)."""

    code = "row_error"

    def __init__(self, message: str, row: int, column: str | None = None):
        self.row = row
        self.column = column
        where = f"row {row}" + (f", column '{column}'" if column else "")
        super().__init__(f"{message} ({where})")


class DslError(WorkbenchError):
    code = "dsl_error"


class DslLexError(DslError):
    """Lexical error with a 1-based character offset into the source."""

    code = "dsl_lex_error"

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"lexical error at offset {offset}: {message}")


class DslSyntaxError(DslError):
    """Parse error carrying the offset and the set of acceptable tokens."""

    code = "dsl_syntax_error"

    def __init__(self, offset: int, expected: tuple[str, ...], found: str):
        self.offset = offset
        self.expected = expected
        self.found = found
        super().__init__(
            f"syntax error at offset {offset}: expected {' or '.join(expected)}, found {found}"
        )


class DslBindError(DslError):
    """Expression references a column that does not resolve against the
    dataset schema, or compares incompatible types."""

    code = "dsl_bind_error"


class DegenerateTreatmentError(WorkbenchError):
    """Treatment assignment left one arm empty, which makes any downstream
    comparison impossible."""

    code = "degenerate_treatment"


class FitError(WorkbenchError):
    code = "fit_error"


class EvaluationError(WorkbenchError):
    """Model evaluation impossible, e.g. single-class labels."""

    code = "evaluation_error"


class SelectionBudgetError(WorkbenchError):
    """Exhaustive enumeration would exceed the configured budget."""

    code = "selection_budget_exceeded"


class MatchingError(WorkbenchError):
    code = "matching_error"


class DiagnosticsError(WorkbenchError):
    code = "diagnostics_error"


class BootstrapUnstableError(WorkbenchError):
    """More than the tolerated share of bootstrap replicates failed."""

    code = "bootstrap_unstable"


class SensitivityError(WorkbenchError):
    code = "sensitivity_error"


class ManifestError(WorkbenchError):
    """Static manifest validation failure with per-field messages."""

    code = "manifest_invalid"

    def __init__(self, field_errors: dict[str, str]):
        self.field_errors = dict(field_errors)
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(self.field_errors.items()))
        super().__init__(f"invalid manifest: {detail}")


class PipelineError(WorkbenchError):
    """Failure inside a pipeline stage; remembers which stage died."""

    code = "pipeline_error"

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


class RunNotFoundError(WorkbenchError):
    code = "run_not_found"


class RunConflictError(WorkbenchError):
    """Operation not valid for the run's current status (results of a
    non-terminal run, cancel of a terminal run, ...)."""

    code = "run_conflict"


class CancelledRun(WorkbenchError):
    """Raised inside a pipeline when cancellation was requested; never
    escapes the engine."""

    code = "cancelled"
