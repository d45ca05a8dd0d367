"""Exception hierarchy for the unshade toolchain.

Per-entry failures (a single class file, a single advisory document) are
signalled with exceptions so that archive- and corpus-level loops can skip
the entry with a warning instead of aborting the whole run.
"""


class UnshadeError(Exception):
    """Base class for all errors raised by this package."""


class MalformedClassFile(UnshadeError):
    """Class-file bytes violate the binary format (bad magic, truncated
    pool, out-of-range index, unknown constant tag, ...)."""


class MalformedDescriptor(UnshadeError):
    """Field or method descriptor text violates the descriptor grammar."""


class MalformedSignature(UnshadeError):
    """Generic signature text violates the signature grammar."""


class UnsupportedConstruct(UnshadeError):
    """A live reference resolves to a constant the canonicalizer does not
    understand; the class must be skipped."""


class RelocationConflict(UnshadeError):
    """Two relocation rules claim the same package prefix."""


class MalformedArchive(UnshadeError):
    """Input bytes are not a readable ZIP container."""


class EmptyArtifact(UnshadeError):
    """Archive yielded zero hashable classes."""


class MalformedAdvisory(UnshadeError):
    """OSV document violates the subset of the schema we read."""


class NotFound(UnshadeError):
    """Artifact absent from the repository (HTTP 404 or offline cache miss)."""


class TransportError(UnshadeError):
    """Download kept failing after the configured number of retries."""


class CorruptKb(UnshadeError):
    """Knowledge-base file fails magic or invariant validation."""


class VersionMismatch(UnshadeError):
    """Knowledge-base file was written by an incompatible format version."""


class DuplicateCoordinate(UnshadeError):
    """Same GAV fingerprinted twice with differing hash sets."""


class MalformedSbom(UnshadeError):
    """Input document is not a CycloneDX SBOM we can process."""


class NotMavenPurl(UnshadeError):
    """Package URL belongs to a non-Maven ecosystem."""


class MalformedPurl(UnshadeError):
    """Package URL cannot be parsed at all."""
