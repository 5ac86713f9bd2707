from typing import Optional


class BenchError(Exception):
    """
    Base class for every error raised by the benchmark.
    """


class ConfigError(BenchError, ValueError):
    """
    Settings file missing, unreadable or failing validation.
    """


class CovarianceError(BenchError, ValueError):
    """
    Covariance specification out of range or matrix not positive definite.
    """


class DataFormatError(BenchError, ValueError):
    """
    Malformed dataset file. Carries the offending position when known.
    """

    def __init__(
        self,
        message: str,
        row: Optional[int] = None,
        column: Optional[int] = None,
        expected: Optional[str] = None,
    ):
        self.row = row
        self.column = column
        self.expected = expected
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        text = message
        if location:
            text = f"{message} ({', '.join(location)})"
        if expected:
            text = f"{text}; expected {expected}"
        super().__init__(text)


class IllPosedError(BenchError, ValueError):
    """
    Problem has no unique solution (e.g. rank-deficient OLS design).
    """


class SamplerAbort(BenchError, RuntimeError):
    """
    Sampler gave up, e.g. warmup was almost entirely divergent.
    """


class StorageError(BenchError, OSError):
    """
    Results file could not be written or read.
    """

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{message}: {path}" if path else message)
