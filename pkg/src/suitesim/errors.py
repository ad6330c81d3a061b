"""Exception types shared by the library and the CLI."""


class DataError(ValueError):
    """Invalid input data or arguments (CLI exit code 2)."""


class InvariantError(RuntimeError):
    """An internal consistency check failed (CLI exit code 3)."""


def check(condition, message):
    if not condition:
        raise InvariantError(message)
