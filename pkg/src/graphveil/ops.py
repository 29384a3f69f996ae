"""Executable semantics for every operation kind.

All operations read only the logical bytes of their inputs (multiple inputs
are concatenated in port order) and return unpadded payloads, so padding can
never change a result.

Hash uses SHA-256. Encrypt and Decrypt XOR with an xorshift keystream keyed
by ``params["key"]``, so each is the inverse of the other. Compress and
Decompress use (run length, byte) pairs with runs of 1..255.
"""

from __future__ import annotations

import hashlib
from collections.abc import Callable, Sequence
from typing import Any

import numpy as np

from graphveil import kernels
from graphveil.errors import ArityError, FormatError, InvalidArgumentError
from graphveil.graph import Custom, Kind, OpKind
from graphveil.payload import Payload

DEFAULT_KEY = 0x5EED
DIGEST_SIZE = 32
MODEL_SIZE = 64

CustomOp = Callable[[list[bytes], dict[str, Any]], list[bytes]]
_custom_ops: dict[str, CustomOp] = {}


def register_custom(name: str, fn: CustomOp) -> None:
    """Register the implementation for ``Custom(name)`` nodes.

    ``fn`` receives the logical input bytes and the node params and returns
    a list of output byte strings.
    """
    if not name:
        raise InvalidArgumentError("custom op name must be non-empty")
    _custom_ops[name] = fn


def _normalize(data: bytes) -> bytes:
    if not data:
        return b""
    a = np.frombuffer(data, dtype=np.uint8).astype(np.int32)
    lo, hi = int(a.min()), int(a.max())
    if hi == lo:
        return bytes(len(data))
    return ((a - lo) * 255 // (hi - lo)).astype(np.uint8).tobytes()


def _split(data: bytes, parts: int) -> list[bytes]:
    n = len(data)
    base, extra = divmod(n, parts)
    out, pos = [], 0
    for i in range(parts):
        size = base + (1 if i < extra else 0)
        out.append(data[pos:pos + size])
        pos += size
    return out


def _search(data: bytes, needle: int) -> bytes:
    ordered = np.sort(np.frombuffer(data, dtype=np.uint8))
    idx = int(np.searchsorted(ordered, needle, side="left"))
    return idx.to_bytes(8, "big")


def run_op(
    kind: Kind,
    inputs: Sequence[Payload],
    params: dict[str, Any] | None = None,
    rng_seed: int = 0,
    arity: int | None = None,
) -> list[Payload]:
    """Run one operation on its input payloads.

    Args:
        kind: operation kind.
        inputs: input payloads in port order.
        params: per-node parameters (``needle``, ``key``, ``k``, ``parts``,
            ``iters``, ``rounds``...).
        rng_seed: seeds the Train/Evaluate kernels.
        arity: expected input count; defaults to 1.

    Raises:
        ArityError: ``len(inputs)`` differs from ``arity``.
        FormatError: Decompress input is not a valid run-length stream.
    """
    params = params or {}
    expected = 1 if arity is None else arity
    if len(inputs) != expected:
        raise ArityError(f"{kind} expects {expected} inputs, got {len(inputs)}")
    data = b"".join(p.logical for p in inputs)
    seed = rng_seed & 0xFFFFFFFFFFFFFFFF

    if isinstance(kind, Custom):
        fn = _custom_ops.get(kind.name)
        if fn is None:
            raise InvalidArgumentError(f"no implementation registered for {kind.name!r}")
        return [Payload.of(b) for b in fn([p.logical for p in inputs], params)]

    if kind is OpKind.SORT:
        out = [np.sort(np.frombuffer(data, dtype=np.uint8)).tobytes()]
    elif kind is OpKind.SEARCH:
        out = [_search(data, int(params.get("needle", 0)))]
    elif kind is OpKind.HASH:
        out = [hashlib.sha256(data).digest()]
    elif kind in (OpKind.ENCRYPT, OpKind.DECRYPT):
        out = [kernels.xor_stream(data, int(params.get("key", DEFAULT_KEY)) & 0xFFFFFFFFFFFFFFFF)]
    elif kind is OpKind.COMPRESS:
        out = [kernels.rle_encode(data)]
    elif kind is OpKind.DECOMPRESS:
        try:
            out = [kernels.rle_decode(data)]
        except ValueError as exc:
            raise FormatError(str(exc)) from None
    elif kind is OpKind.DOWNSAMPLE:
        k = int(params.get("k", 2))
        if k < 1:
            raise InvalidArgumentError("downsample factor must be >= 1")
        out = [data[::k]]
    elif kind is OpKind.NORMALIZE:
        out = [_normalize(data)]
    elif kind is OpKind.SPLIT:
        parts = int(params.get("parts", 2))
        if parts < 1:
            raise InvalidArgumentError("parts must be >= 1")
        out = _split(data, parts)
    elif kind is OpKind.TRAIN:
        out = [kernels.train_kernel(data, int(params.get("iters", 2)), seed)]
    elif kind is OpKind.EVALUATE:
        out = [kernels.evaluate_kernel(data, int(params.get("iters", 1)), seed)]
    elif kind is OpKind.FAKE:
        out = [kernels.busy_kernel(data, int(params.get("rounds", 1)))]
    else:  # pragma: no cover - enum is exhaustive
        raise InvalidArgumentError(f"unsupported kind {kind}")
    return [Payload.of(b) for b in out]
