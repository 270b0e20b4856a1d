"""Exception hierarchy shared across the toolkit."""


class SOTVerseError(Exception):
    """Base class for all toolkit errors."""


class DomainError(SOTVerseError, ValueError):
    """An operation was called outside its mathematical domain."""


class LoadError(SOTVerseError):
    """A dataset, manifest, table or result file failed to load.

    The message always names the offending entry (file, sequence id or
    line number) so batch loads can be diagnosed without a debugger.
    """


class ConfigError(SOTVerseError):
    """A policy, task spec or threshold file is inconsistent."""


class DecodeError(SOTVerseError):
    """A wire-protocol line could not be decoded.

    Attributes:
        offset: byte offset into the line where decoding failed.
    """

    def __init__(self, message, offset=0):
        super().__init__(message)
        self.offset = offset


class SessionError(SOTVerseError):
    """The tracker channel broke down (handshake, transport or exit)."""
