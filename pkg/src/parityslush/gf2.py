"""Exact linear algebra over GF(2) on word-packed bit matrices.

Rows are stored as little-endian uint64 words: column ``j`` of a row lives in
word ``j // 64`` at bit ``j % 64``. Padding bits past ``n_cols`` are always zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

__all__ = [
    "BitVector",
    "BitMatrix",
    "RankProfile",
    "rank_profile",
    "frozen_set",
    "sample_kernel",
    "combine_rows",
    "transpose",
    "read_matrix",
    "write_matrix",
    "parse_matrix",
    "format_matrix",
    "vector_to_str",
]

WORD = 64


def n_words(n_bits: int) -> int:
    return (n_bits + WORD - 1) // WORD


def _pack(dense: np.ndarray, n_bits: int) -> np.ndarray:
    """Pack a 2-D 0/1 array into rows of uint64 words."""
    dense = np.asarray(dense, dtype=np.uint8)
    if n_bits == 0:
        return np.zeros((dense.shape[0] if dense.ndim == 2 else 1, 0), dtype=np.uint64)
    dense = dense.reshape(-1, n_bits)
    w = n_words(n_bits)
    out = np.zeros((dense.shape[0], w * 8), dtype=np.uint8)
    if n_bits:
        packed = np.packbits(dense, axis=1, bitorder="little")
        out[:, : packed.shape[1]] = packed
    return out.view("<u8").astype(np.uint64, copy=False).reshape(dense.shape[0], w)


def _unpack(words: np.ndarray, n_bits: int) -> np.ndarray:
    """Inverse of :func:`_pack`; returns uint8 array of shape (rows, n_bits)."""
    words = np.ascontiguousarray(words, dtype="<u8")
    if words.ndim == 1:
        words = words[None, :]
    if words.shape[-1] == 0:
        return np.zeros((words.shape[0], n_bits), dtype=np.uint8)
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :n_bits]


@dataclass(frozen=True)
class BitVector:
    length: int
    bits: np.ndarray = field(repr=False)

    @classmethod
    def from_dense(cls, values: Iterable[int]) -> "BitVector":
        arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.uint8)
        return cls(arr.size, _pack(arr[None, :] & 1, arr.size)[0])

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(length, np.zeros(n_words(length), dtype=np.uint64))

    def to_dense(self) -> np.ndarray:
        return _unpack(self.bits[None, :], self.length)[0]

    def support(self) -> list[int]:
        return np.flatnonzero(self.to_dense()).tolist()

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return int((int(self.bits[i // WORD]) >> (i % WORD)) & 1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self.length == other.length and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.length, self.bits.tobytes()))

    def __str__(self) -> str:
        return vector_to_str(self)


@dataclass(frozen=True)
class BitMatrix:
    """Immutable m x n matrix over GF(2)."""

    n_rows: int
    n_cols: int
    words: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.words.shape != (self.n_rows, n_words(self.n_cols)):
            raise ValueError("word array has the wrong shape")
        self.words.setflags(write=False)

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> "BitMatrix":
        return cls(n_rows, n_cols, np.zeros((n_rows, n_words(n_cols)), dtype=np.uint64))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        idx = np.arange(n)
        return cls.from_entries(n, n, idx, idx)

    @classmethod
    def from_dense(cls, rows: Sequence[Sequence[int]] | np.ndarray) -> "BitMatrix":
        arr = np.asarray(rows, dtype=np.uint8)
        if arr.ndim != 2:
            arr = arr.reshape(len(rows), -1) if len(rows) else np.zeros((0, 0), dtype=np.uint8)
        return cls(arr.shape[0], arr.shape[1], _pack(arr & 1, arr.shape[1]))

    @classmethod
    def from_entries(cls, n_rows: int, n_cols: int, rows, cols) -> "BitMatrix":
        """Build from coordinate lists; repeated coordinates cancel mod 2."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols):
            raise ValueError("entry out of range")
        words = np.zeros((n_rows, n_words(n_cols)), dtype=np.uint64)
        if rows.size:
            np.bitwise_xor.at(words, (rows, cols // WORD), np.left_shift(np.uint64(1), (cols % WORD).astype(np.uint64)))
        return cls(n_rows, n_cols, words)

    @classmethod
    def from_rows(cls, rows: Sequence[BitVector], n_cols: int | None = None) -> "BitMatrix":
        if n_cols is None:
            n_cols = rows[0].length if rows else 0
        if any(r.length != n_cols for r in rows):
            raise ValueError("rows have inconsistent lengths")
        words = np.stack([r.bits for r in rows]) if rows else np.zeros((0, n_words(n_cols)), dtype=np.uint64)
        return cls(len(rows), n_cols, words.astype(np.uint64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def rows(self) -> list[BitVector]:
        return [BitVector(self.n_cols, self.words[i].copy()) for i in range(self.n_rows)]

    def row(self, i: int) -> BitVector:
        return BitVector(self.n_cols, self.words[i].copy())

    def to_dense(self) -> np.ndarray:
        return _unpack(self.words, self.n_cols).reshape(self.n_rows, self.n_cols)

    def entries(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column indices of the nonzero entries, sorted lexicographically."""
        r, w = np.nonzero(self.words)
        if r.size == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        blocks = np.ascontiguousarray(self.words[r, w], dtype="<u8")
        bits = np.unpackbits(blocks.view(np.uint8).reshape(-1, 8), axis=1, bitorder="little")
        k, b = np.nonzero(bits)
        return r[k].astype(np.int64), (w[k] * WORD + b).astype(np.int64)

    def nnz(self) -> int:
        return int(np.bitwise_count(self.words).sum()) if hasattr(np, "bitwise_count") else len(self.entries()[0])

    def submatrix(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> "BitMatrix":
        """Minor on the given rows and columns, in the order given."""
        row_idx = np.asarray(row_idx, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        col_map = np.full(self.n_cols, -1, dtype=np.int64)
        col_map[col_idx] = np.arange(col_idx.size)
        row_map = np.full(self.n_rows, -1, dtype=np.int64)
        row_map[row_idx] = np.arange(row_idx.size)
        r, c = self.entries()
        keep = (row_map[r] >= 0) & (col_map[c] >= 0)
        return BitMatrix.from_entries(row_idx.size, col_idx.size, row_map[r[keep]], col_map[c[keep]])

    def delete_rows(self, drop: Iterable[int]) -> "BitMatrix":
        mask = np.ones(self.n_rows, dtype=bool)
        mask[list(drop)] = False
        return BitMatrix(int(mask.sum()), self.n_cols, self.words[mask].copy())

    def append_rows(self, other: "BitMatrix") -> "BitMatrix":
        if other.n_cols != self.n_cols:
            raise ValueError("column counts differ")
        return BitMatrix(self.n_rows + other.n_rows, self.n_cols, np.vstack([self.words, other.words]))

    def matvec(self, x: BitVector) -> BitVector:
        if x.length != self.n_cols:
            raise ValueError("dimension mismatch")
        prod = np.bitwise_and(self.words, x.bits[None, :])
        parity = _row_parity(prod)
        return BitVector.from_dense(parity)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.words, other.words)

    def __hash__(self) -> int:
        return hash((self.shape, self.words.tobytes()))


def _row_parity(words: np.ndarray) -> np.ndarray:
    acc = np.bitwise_xor.reduce(words, axis=1) if words.shape[1] else np.zeros(words.shape[0], dtype=np.uint64)
    for s in (32, 16, 8, 4, 2, 1):
        acc = acc ^ (acc >> np.uint64(s))
    return (acc & np.uint64(1)).astype(np.uint8)


@dataclass(frozen=True)
class RankProfile:
    rank: int
    nullity: int
    pivot_cols: list[int]
    basis: BitMatrix = field(repr=False)

    @property
    def kernel_basis(self) -> list[BitVector]:
        return self.basis.rows

    @property
    def free_cols(self) -> list[int]:
        piv = set(self.pivot_cols)
        return [j for j in range(self.basis.n_cols) if j not in piv]


def _rref(words: np.ndarray, n_cols: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form in place; returns (nonzero rows, pivot columns)."""
    m = words.shape[0]
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == m:
            break
        w, b = divmod(c, WORD)
        bit = np.uint64(1) << np.uint64(b)
        col = (words[r:, w] & bit) != 0
        hit = np.flatnonzero(col)
        if hit.size == 0:
            continue
        p = r + int(hit[0])
        if p != r:
            words[[r, p]] = words[[p, r]]
        mask = (words[:, w] & bit) != 0
        mask[r] = False
        idx = np.flatnonzero(mask)
        if idx.size:
            words[idx, w:] ^= words[r, w:]
        pivots.append(c)
        r += 1
    return words[:r], pivots


def rank_profile(A: BitMatrix) -> RankProfile:
    """Rank, pivots and the normalized kernel basis of ``A``.

    The basis has one vector per free column (increasing), carrying a 1 at its
    own free column and 0 at every other free column.
    """
    n = A.n_cols
    R, pivots = _rref(A.words.copy(), n)
    rank = len(pivots)
    piv = np.asarray(pivots, dtype=np.int64)
    is_free = np.ones(n, dtype=bool)
    is_free[piv] = False
    free = np.flatnonzero(is_free)
    basis = np.zeros((free.size, n), dtype=np.uint8)
    basis[np.arange(free.size), free] = 1
    if rank and free.size:
        dense = _unpack(R, n)
        basis[:, piv] = dense[:, free].T
    return RankProfile(rank, int(free.size), pivots, BitMatrix(free.size, n, _pack(basis, n)))


def frozen_set(A: BitMatrix, profile: RankProfile | None = None) -> list[int]:
    """Coordinates that vanish on every kernel vector."""
    if profile is None:
        profile = rank_profile(A)
    if A.n_cols == 0:
        return []
    union = np.bitwise_or.reduce(profile.basis.words, axis=0) if profile.nullity else np.zeros(n_words(A.n_cols), dtype=np.uint64)
    return np.flatnonzero(_unpack(union[None, :], A.n_cols)[0] == 0).tolist()


def combine_rows(basis: BitMatrix, coeffs: np.ndarray) -> np.ndarray:
    """XOR-combine basis rows; ``coeffs`` is a (count, n_basis) 0/1 array.

    Returns packed words of shape (count, n_words).
    """
    coeffs = np.asarray(coeffs, dtype=bool)
    out = np.zeros((coeffs.shape[0], basis.words.shape[1]), dtype=np.uint64)
    for k in range(basis.n_rows):
        sel = coeffs[:, k]
        if sel.any():
            out[sel] ^= basis.words[k]
    return out


def sample_kernel(A: BitMatrix, profile: RankProfile, count: int, rng: np.random.Generator) -> list[BitVector]:
    """Independent uniform samples from ker A."""
    coeffs = rng.integers(0, 2, size=(count, profile.nullity), dtype=np.uint8)
    words = combine_rows(profile.basis, coeffs)
    return [BitVector(A.n_cols, words[i]) for i in range(count)]


def transpose(A: BitMatrix) -> BitMatrix:
    r, c = A.entries()
    return BitMatrix.from_entries(A.n_cols, A.n_rows, c, r)


def in_row_space(rref_words: np.ndarray, pivots: Sequence[int], vec: np.ndarray) -> bool:
    """Membership test against an RREF produced by :func:`_rref`."""
    v = vec.copy()
    for i, c in enumerate(pivots):
        w, b = divmod(c, WORD)
        if (int(v[w]) >> b) & 1:
            v ^= rref_words[i]
    return not v.any()


# text format


def format_matrix(A: BitMatrix) -> str:
    r, c = A.entries()
    lines = [f"{A.n_rows} {A.n_cols}"]
    lines += [f"{i} {j}" for i, j in zip(r.tolist(), c.tolist())]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> BitMatrix:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise ValueError("missing 'm n' header")
    m, n = int(lines[0][0]), int(lines[0][1])
    rows, cols = [], []
    for parts in lines[1:]:
        if len(parts) != 2:
            raise ValueError(f"bad entry line: {' '.join(parts)!r}")
        rows.append(int(parts[0]))
        cols.append(int(parts[1]))
    return BitMatrix.from_entries(m, n, rows, cols)


def read_matrix(fh: TextIO | str) -> BitMatrix:
    if isinstance(fh, str):
        with open(fh) as f:
            return parse_matrix(f.read())
    return parse_matrix(fh.read())


def write_matrix(A: BitMatrix, fh: TextIO) -> None:
    fh.write(format_matrix(A))


def vector_to_str(x: BitVector) -> str:
    return "".join("1" if b else "0" for b in x.to_dense())
