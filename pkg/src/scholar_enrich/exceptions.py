class InputError(ValueError):
    """Bad input data or arguments (CLI exit code 1)."""


class ValidationError(InputError):
    """A loaded structure violates its invariants (e.g. a FOS level inversion)."""


class DependencyError(InputError):
    """A pipeline stage was run before the stage producing its inputs."""

    def __init__(self, missing, required_stage):
        self.missing = missing
        self.required_stage = required_stage
        super().__init__(f"missing {missing}; run `{required_stage}` first")


class ConsistencyError(RuntimeError):
    """Independent implementations disagreed; indicates a bug (CLI exit code 2)."""
