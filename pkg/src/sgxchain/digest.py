"""Byte-string algebra used by both hash-chain algorithms.

Chain values are plain ``bytes``.  Anything that went through the hash
primitive is a :class:`Digest`, a 32-octet ``bytes`` subclass, which lets
the untrusted channel refuse raw chain values by type.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from typing import Callable, Sequence

DIGEST_SIZE = 32
TAG_SIZE = 8
NONCE_SIZE = 16


class Digest(bytes):
    """Exactly 32 octets of hash output."""

    def __new__(cls, value: bytes = bytes(DIGEST_SIZE)):
        if len(value) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} octets, got {len(value)}")
        return super().__new__(cls, value)

    def __repr__(self) -> str:
        return f"Digest({self.hex()})"


ZERO_DIGEST = Digest()


def _sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _blake2s(data: bytes) -> bytes:
    return hashlib.blake2s(data).digest()


HASH_FUNCTIONS: dict[str, Callable[[bytes], bytes]] = {
    "sha256": _sha256,
    "blake2s": _blake2s,
}
DEFAULT_HASH = "sha256"


def hash_bytes(data: bytes, name: str = DEFAULT_HASH) -> Digest:
    return Digest(HASH_FUNCTIONS[name](bytes(data)))


def xor(a: bytes, b: bytes) -> Digest:
    if len(a) != DIGEST_SIZE or len(b) != DIGEST_SIZE:
        raise ValueError("xor is defined only between two 32-octet digests")
    return Digest((int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(DIGEST_SIZE, "big"))


def int_to_bytes(value: int) -> bytes:
    """Minimal big-endian encoding; zero encodes as a single 0x00."""
    if value < 0:
        raise ValueError("negative values have no encoding")
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def add(operands: Sequence[bytes]) -> bytes:
    """Sum of the operands read as big-endian unsigned integers."""
    if len(operands) < 2:
        raise ValueError("add needs at least two operands")
    if any(len(op) == 0 for op in operands):
        raise ValueError("add operands must be nonempty")
    return int_to_bytes(sum(int.from_bytes(op, "big") for op in operands))


def concat(a: bytes, b: bytes) -> bytes:
    return bytes(a) + bytes(b)


@dataclass
class OpCounters:
    hash_count: int = 0
    xor_count: int = 0
    add_count: int = 0
    con_count: int = 0

    def __add__(self, other: "OpCounters") -> "OpCounters":
        return OpCounters(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class Algebra:
    """Counting front end over the primitives.

    Both algorithms route every primitive through one of these so the cost
    model can be checked against what actually ran.  ``add`` of ``m``
    operands counts as ``m - 1`` additions.
    """

    def __init__(self, hash_name: str = DEFAULT_HASH):
        if hash_name not in HASH_FUNCTIONS:
            raise KeyError(f"unknown hash function {hash_name!r}")
        self.hash_name = hash_name
        self.counters = OpCounters()

    def hash(self, data: bytes) -> Digest:
        self.counters.hash_count += 1
        return hash_bytes(data, self.hash_name)

    def xor(self, a: bytes, b: bytes) -> Digest:
        self.counters.xor_count += 1
        return xor(a, b)

    def add(self, operands: Sequence[bytes]) -> bytes:
        self.counters.add_count += len(operands) - 1
        return add(operands)

    def concat(self, a: bytes, b: bytes) -> bytes:
        self.counters.con_count += 1
        return concat(a, b)


def to_hex(data: bytes | None) -> str | None:
    return None if data is None else bytes(data).hex()


def from_hex(text: str) -> bytes:
    return bytes.fromhex(text)

