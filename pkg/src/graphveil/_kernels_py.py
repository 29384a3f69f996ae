"""Pure-Python versions of the byte kernels, used when the extension is absent."""

from __future__ import annotations

_M64 = (1 << 64) - 1


def _splitmix(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _M64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return state, z ^ (z >> 31)


def rle_encode(data: bytes) -> bytes:
    out = bytearray()
    n = len(data)
    i = 0
    while i < n:
        b = data[i]
        run = 1
        while i + run < n and run < 255 and data[i + run] == b:
            run += 1
        out.append(run)
        out.append(b)
        i += run
    return bytes(out)


def rle_decode(data: bytes) -> bytes:
    if len(data) % 2:
        raise ValueError("run-length stream has odd length")
    out = bytearray()
    for i in range(0, len(data), 2):
        if data[i] == 0:
            raise ValueError(f"zero run length at offset {i}")
        out += bytes((data[i + 1],)) * data[i]
    return bytes(out)


def xor_stream(data: bytes, key: int) -> bytes:
    _, x = _splitmix(key & _M64)
    x |= 1
    out = bytearray(len(data))
    for i, b in enumerate(data):
        x ^= x >> 12
        x ^= (x << 25) & _M64
        x ^= x >> 27
        out[i] = b ^ (((x * 2685821657736338717) & _M64) >> 56)
    return bytes(out)


def _lanes(seed: int) -> list[int]:
    st = seed & _M64
    s = []
    for _ in range(8):
        st, z = _splitmix(st)
        s.append(z)
    return s


def _to_bytes(s: list[int]) -> bytes:
    return b"".join(v.to_bytes(8, "little") for v in s)


def train_kernel(data: bytes, iters: int, seed: int) -> bytes:
    s = _lanes(seed)
    for it in range(iters):
        for i, b in enumerate(data):
            lane = i & 7
            v = ((s[lane] ^ (b + it)) * 0x100000001B3) & _M64
            s[lane] = v ^ (v >> 29)
        for j in range(8):
            s[j] = (s[j] + s[(j + 1) & 7]) & _M64
    return _to_bytes(s)


def evaluate_kernel(data: bytes, iters: int, seed: int) -> bytes:
    s = _lanes(seed ^ 0xA5A5A5A5A5A5A5A5)
    for it in range(iters):
        for i, b in enumerate(data):
            lane = i & 7
            v = (s[lane] * 6364136223846793005 + 1442695040888963407 + b) & _M64
            s[lane] = v ^ (v >> 33)
        for j in range(8):
            s[j] ^= s[(j + 3) & 7] >> 7
    return _to_bytes(s)


def busy_kernel(data: bytes, rounds: int) -> bytes:
    h = 14695981039346656037
    for _ in range(rounds):
        for b in data:
            h = ((h ^ b) * 1099511628211) & _M64
    return h.to_bytes(8, "little")


def pick_index(frontiers: list, weights: list, u: float) -> int:
    """Weighted choice among non-empty frontiers; -1 when all are empty."""
    total = 0.0
    for i, f in enumerate(frontiers):
        if f:
            total += weights[i]
    if total <= 0.0:
        return -1
    r = u * total
    last = -1
    for i, f in enumerate(frontiers):
        if f:
            last = i
            r -= weights[i]
            if r < 0.0:
                return i
    return last  # round-off landed past the end
