"""Exception types shared across the pipeline."""


class SitegrounderError(Exception):
    """Base class for all errors raised by this package."""


class FetchError(SitegrounderError):
    """A page fetch failed at the transport level (DNS, timeout, refused)."""


class SeedUnreachable(SitegrounderError):
    """The seed URL could not be fetched; the crawl cannot start."""


class UrlRejected(SitegrounderError):
    """A link was rejected by URL normalization.

    ``reason`` is a short machine-readable code: "empty", "fragment-only",
    "scheme", "cross-host" or "unparsable".
    """

    def __init__(self, reason: str, raw: str = ""):
        super().__init__(f"{reason}: {raw!r}" if raw else reason)
        self.reason = reason
        self.raw = raw


class NotHtml(SitegrounderError):
    """The fetched resource is not an HTML document."""


class RemoteUnavailable(SitegrounderError):
    """A remote embedding endpoint failed or returned a malformed response."""


class DimensionMismatch(SitegrounderError):
    """A vector's length does not match the expected dimension."""


class DuplicateId(SitegrounderError):
    """A chunk id was added to an index that already contains it."""


class CorruptIndex(SitegrounderError):
    """An index file failed its header or length checks."""


class LlmUnavailable(SitegrounderError):
    """A remote LLM endpoint failed or returned a malformed response."""


class SessionBusy(SitegrounderError):
    """A second turn was started on a session configured to reject overlap."""


class UnknownRecord(SitegrounderError):
    """No evaluation record matches the given (qid, profile_id)."""


class RatingOutOfRange(SitegrounderError):
    """A star rating outside the 1..5 range was supplied."""
