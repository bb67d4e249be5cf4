"""Exception and warning types shared across the package.

Every error carries a stable ``code`` string so CLI output and language
bindings can identify failures without parsing prose.
"""


class HeadctOneError(Exception):
    """Base class for all package errors."""

    code = "error"


class GraphSyntaxError(HeadctOneError):
    """Input is not a syntactically valid graph document."""

    code = "syntax_error"


class SchemaError(HeadctOneError):
    """Structurally valid document violating the graph schema.

    ``path`` points at the offending element (e.g. ``entities[2].label``).
    """

    code = "schema_error"

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class CorruptDataError(HeadctOneError):
    """Embedded ontology tables failed validation at load time."""

    code = "corrupt_data"


class RootNotFound(HeadctOneError):
    """Anatomy ingestion could not find a requested root name."""

    code = "root_not_found"

    def __init__(self, root):
        super().__init__(f"root not found in edge file: {root!r}")
        self.root = root


class MalformedRow(HeadctOneError):
    """Anatomy edge file contains an unparseable row."""

    code = "malformed_row"

    def __init__(self, line_number, message):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class NotNormalized(HeadctOneError):
    """Scoring was attempted on a graph with unresolved entities."""

    code = "not_normalized"


class InsufficientCorpus(HeadctOneError):
    """An experiment needs more labeled reports than the corpus has."""

    code = "insufficient_corpus"


class ClassifierUnavailable(HeadctOneError):
    """The external descriptor classifier could not be reached.

    Non-fatal: the normalizer logs it and falls back to the similarity tier.
    """

    code = "classifier_unavailable"


class ConfigError(HeadctOneError):
    """A config, scheme, or manifest file is invalid."""

    code = "config_error"


class CorpusTooSmall(UserWarning):
    """Fewer distinct concepts exist than a top-K scheme asked for."""


class LoadWarning(UserWarning):
    """Lenient-mode load downgraded a validation failure."""


class DegenerateSchemeWarning(UserWarning):
    """A weight scheme assigns zero weight to everything."""
