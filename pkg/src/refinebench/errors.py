"""Exception hierarchy shared by every module."""

from __future__ import annotations


class RefineBenchError(Exception):
    pass


# raster
class ImageNotFound(RefineBenchError, FileNotFoundError):
    pass


class DecodeError(RefineBenchError):
    pass


class ImageIoError(RefineBenchError, OSError):
    pass


class ZeroDim(RefineBenchError, ValueError):
    pass


class OutOfBounds(RefineBenchError, ValueError):
    pass


class BadKernel(RefineBenchError, ValueError):
    pass


# corrupt / triplets
class PoolTooSmall(RefineBenchError):
    pass


class SpecMismatch(RefineBenchError, ValueError):
    pass


class SourceMissing(RefineBenchError):
    pass


class ManifestError(RefineBenchError):
    pass


class TemplateError(RefineBenchError, ValueError):
    pass


# tools
class SchemaError(RefineBenchError, ValueError):
    """A tool call does not match its schema.

    ``path`` is the dotted location of the offending field (``params.degrees``).
    """

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class BBoxOutOfRange(RefineBenchError, ValueError):
    pass


class NoDetection(RefineBenchError):
    pass


# retrieve
class MissingField(RefineBenchError, ValueError):
    pass


class EmbedderError(RefineBenchError):
    pass


class DegenerateInput(EmbedderError):
    pass


class DimMismatch(RefineBenchError, ValueError):
    pass


# services
class ServiceError(RefineBenchError):
    pass


class ServiceTimeout(ServiceError, TimeoutError):
    pass


# metrics
class EmptyInput(RefineBenchError, ValueError):
    pass
