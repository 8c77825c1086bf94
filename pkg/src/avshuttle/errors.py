"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI returns for it.
"""


class ShuttleError(Exception):
    exit_code = 1


class InvalidArgumentError(ShuttleError, ValueError):
    exit_code = 2


class DegenerateInputError(ShuttleError, ValueError):
    exit_code = 3


class ValidationError(ShuttleError, ValueError):
    exit_code = 4


class OsmParseError(ShuttleError, ValueError):
    exit_code = 5

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class OsmReferenceError(ShuttleError, LookupError):
    exit_code = 6

    def __init__(self, way_id, ref):
        super().__init__(f"way {way_id} references missing node {ref}")
        self.way_id = way_id
        self.ref = ref


class NotFoundError(ShuttleError, LookupError):
    exit_code = 7


class TopologyError(ShuttleError, ValueError):
    exit_code = 8


class ReportIOError(ShuttleError, OSError):
    exit_code = 9

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)
