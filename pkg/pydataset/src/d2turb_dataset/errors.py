"""Errors raised while loading dataset tuples."""


class DatasetFormatError(ValueError):
    """A file violates the dataset's binary or JSON layout."""


class IntegrityError(DatasetFormatError):
    """Stored metadata disagrees with the bytes on disk."""


class ConsistencyError(DatasetFormatError):
    """Metadata fields contradict each other (e.g. category vs strength)."""


class InvalidDatasetError(DatasetFormatError):
    """Directory is not a dataset (missing manifest with samples present)."""
