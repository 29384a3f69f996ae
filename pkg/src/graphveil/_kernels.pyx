# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled byte-level kernels. Must stay bit-identical to _kernels_py."""

from libc.stdint cimport uint64_t, uint8_t
from libc.string cimport memset

cdef uint64_t _splitmix(uint64_t *state) nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


def rle_encode(const uint8_t[:] data):
    cdef Py_ssize_t n = data.shape[0], i = 0, j = 0, run
    out = bytearray(2 * n)
    cdef uint8_t[:] o = out
    cdef uint8_t b
    while i < n:
        b = data[i]
        run = 1
        while i + run < n and run < 255 and data[i + run] == b:
            run += 1
        o[j] = <uint8_t>run
        o[j + 1] = b
        j += 2
        i += run
    return bytes(out[:j])


def rle_decode(const uint8_t[:] data):
    cdef Py_ssize_t n = data.shape[0], i, j = 0, total = 0, k
    if n % 2:
        raise ValueError("run-length stream has odd length")
    for i in range(0, n, 2):
        if data[i] == 0:
            raise ValueError(f"zero run length at offset {i}")
        total += data[i]
    out = bytearray(total)
    cdef uint8_t[:] o = out
    for i in range(0, n, 2):
        for k in range(data[i]):
            o[j] = data[i + 1]
            j += 1
    return bytes(out)


def xor_stream(const uint8_t[:] data, uint64_t key):
    cdef Py_ssize_t n = data.shape[0], i
    out = bytearray(n)
    cdef uint8_t[:] o = out
    cdef uint64_t st = key
    cdef uint64_t x = _splitmix(&st) | 1
    for i in range(n):
        x ^= x >> 12
        x ^= x << 25
        x ^= x >> 27
        o[i] = data[i] ^ <uint8_t>((x * <uint64_t>2685821657736338717) >> 56)
    return bytes(out)


cdef bytes _lanes_to_bytes(uint64_t *s):
    out = bytearray(64)
    cdef int j, k
    for j in range(8):
        for k in range(8):
            out[8 * j + k] = <uint8_t>((s[j] >> (8 * k)) & 0xFF)
    return bytes(out)


def train_kernel(const uint8_t[:] data, int iters, uint64_t seed):
    cdef uint64_t s[8]
    cdef uint64_t st = seed
    cdef Py_ssize_t n = data.shape[0], i
    cdef int it, j, l
    for j in range(8):
        s[j] = _splitmix(&st)
    for it in range(iters):
        for i in range(n):
            l = i & 7
            s[l] = (s[l] ^ <uint64_t>(data[i] + it)) * <uint64_t>0x100000001B3
            s[l] ^= s[l] >> 29
        for j in range(8):
            s[j] += s[(j + 1) & 7]
    return _lanes_to_bytes(s)


def evaluate_kernel(const uint8_t[:] data, int iters, uint64_t seed):
    cdef uint64_t s[8]
    cdef uint64_t st = seed ^ <uint64_t>0xA5A5A5A5A5A5A5A5
    cdef Py_ssize_t n = data.shape[0], i
    cdef int it, j, l
    for j in range(8):
        s[j] = _splitmix(&st)
    for it in range(iters):
        for i in range(n):
            l = i & 7
            s[l] = s[l] * <uint64_t>6364136223846793005 + <uint64_t>1442695040888963407 + data[i]
            s[l] ^= s[l] >> 33
        for j in range(8):
            s[j] ^= s[(j + 3) & 7] >> 7
    return _lanes_to_bytes(s)


def busy_kernel(const uint8_t[:] data, int rounds):
    cdef uint64_t h = <uint64_t>14695981039346656037
    cdef Py_ssize_t n = data.shape[0], i
    cdef int r
    for r in range(rounds):
        for i in range(n):
            h = (h ^ data[i]) * <uint64_t>1099511628211
    return int(h).to_bytes(8, "little")


def pick_index(frontiers, weights, double u):
    cdef Py_ssize_t i, n = len(frontiers), last = -1
    cdef double total = 0.0, r
    for i in range(n):
        if frontiers[i]:
            total += <double>weights[i]
    if total <= 0.0:
        return -1
    r = u * total
    for i in range(n):
        if frontiers[i]:
            last = i
            r -= <double>weights[i]
            if r < 0.0:
                return i
    return last
