"""Exception and warning types shared across the package."""


class DegenerateLikelihoodError(ValueError):
    """All state paths for a subject have zero probability under the model."""

    def __init__(self, subject_id: str, visit_index: int):
        self.subject_id = subject_id
        self.visit_index = visit_index
        super().__init__(
            f"likelihood underflowed to zero for subject {subject_id!r} "
            f"at visit {visit_index}"
        )


class CohortParseError(ValueError):
    """Cohort CSV violated the expected format."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class SchemaError(ValueError):
    """Serialized document has a wrong or unsupported schema version."""


class QueryParseError(ValueError):
    """Subgroup filter expression failed to parse."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class StarvedStateWarning(UserWarning):
    """A state received ~zero expected occupation during an EM iteration."""
