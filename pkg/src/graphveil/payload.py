"""Byte buffers with a logical length and a padded physical length."""

from __future__ import annotations

from dataclasses import dataclass

from graphveil.errors import CorruptionError, InvalidArgumentError


@dataclass(frozen=True)
class Payload:
    """A byte buffer whose first ``logical_len`` bytes are the real data.

    Bytes past ``logical_len`` are padding: operations never read them, but an
    observer measuring buffer sizes sees ``physical_len``.
    """

    data: bytes
    logical_len: int

    def __post_init__(self):
        if not 0 <= self.logical_len <= len(self.data):
            raise InvalidArgumentError(
                f"logical_len {self.logical_len} outside buffer of {len(self.data)} bytes")

    @classmethod
    def of(cls, data: bytes) -> Payload:
        data = bytes(data)
        return cls(data, len(data))

    @property
    def physical_len(self) -> int:
        return len(self.data)

    @property
    def padding(self) -> int:
        return len(self.data) - self.logical_len

    @property
    def logical(self) -> bytes:
        if self.logical_len == len(self.data):
            return self.data
        return self.data[: self.logical_len]

    def padded(self, filler: bytes) -> Payload:
        return Payload(self.data + bytes(filler), self.logical_len)

    def stripped(self, amount: int) -> Payload:
        if amount < 0 or amount > self.padding:
            raise CorruptionError(
                f"cannot strip {amount} bytes from payload with {self.padding} padding bytes "
                f"({self.physical_len} physical)")
        return Payload(self.data[: len(self.data) - amount], self.logical_len)


def pad_amount(u: float, level: int, logical_len: int) -> int:
    """Padding size for a draw ``u`` in [0, 1): uniform over 1..max(1, level*20% of len).

    Reusing one ``u`` across levels makes the amount non-decreasing in level.
    """
    hi = max(1, (level * logical_len) // 5)
    return 1 + min(hi - 1, int(u * hi))
