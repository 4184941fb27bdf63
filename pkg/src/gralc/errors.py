"""Exception types shared across the engine."""


class GralcError(Exception):
    """Base class for all engine errors."""


class MalformedXml(GralcError):
    """Input could not be parsed as XML."""


class EmptyBody(GralcError):
    """Article contains no body or abstract text."""


class MissingSection(GralcError):
    """A length-condition extraction requires a section the document lacks."""


class ProviderFailure(GralcError):
    """Embedding provider returned the wrong shape or non-finite values."""


class DimMismatch(GralcError):
    """Vector dimensions disagree with the declared dimension."""


class ZeroVector(GralcError):
    """A zero vector cannot be normalized into the index."""


class EmptyIndex(GralcError):
    """Search requested against an index with no entries."""


class AlreadyEnriched(GralcError):
    """Token embeddings were already fused with knowledge-graph signals."""


class EmptySpan(GralcError):
    """Chunk pooling received an empty token span."""


class MissingGold(GralcError):
    """A retrieval result has no gold document assignment."""


class MissingIndex(GralcError):
    """Evaluation requires an index file that was not built."""


class DisjointRows(GralcError):
    """Report comparison found no overlapping rows."""


class UnsupportedFormat(GralcError):
    """Report rendering was asked for an unknown format."""


class ConfigError(GralcError):
    """Pipeline configuration is invalid."""
