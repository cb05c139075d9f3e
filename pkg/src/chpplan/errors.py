class PlannerError(Exception):
    pass


class DataError(PlannerError):
    """Input data rejected; `path` names the offending field or file."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(message if path is None else f'{path}: {message}')
        self.path = path


class ModelError(PlannerError):
    pass


class SolverError(PlannerError):
    def __init__(self, message: str, dump_path: str | None = None):
        if dump_path is not None:
            message = f'{message} (model dumped to {dump_path})'
        super().__init__(message)
        self.dump_path = dump_path


class UsageError(PlannerError):
    pass
