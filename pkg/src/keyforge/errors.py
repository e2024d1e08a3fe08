"""Exception hierarchy shared across the package."""


class KeyForgeError(Exception):
    """Base class for all errors raised by this package."""


class EncodingError(KeyForgeError):
    """Malformed byte encoding of a scalar, group element, or structure."""


class DepthError(KeyForgeError):
    """Identity tuple exceeds the scheme's maximum depth."""


class PrefixMismatchError(KeyForgeError):
    """Secret key is not a key for the requested identity prefix."""


class InvalidTagError(KeyForgeError):
    """Tag is not a valid node of the tag space."""


class SpanError(KeyForgeError):
    """Timestamp falls outside the tag space's configured span."""


class ForgeRequestError(KeyForgeError):
    """Forge-on-request message rejected (bad signature or recipient)."""


class EpochError(KeyForgeError):
    """Timekeeper epoch out of range, or proof does not fit the statement."""


class UnsignableError(KeyForgeError):
    """Message lacks the headers required for signing."""


class MailParseError(KeyForgeError):
    """Structurally invalid message; ``offset`` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class StorageError(KeyForgeError):
    """Key store could not be read, decrypted, or written."""


class RpcError(KeyForgeError):
    """Structured RPC failure with a JSON-RPC error code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
