"""Sparse and packed-dense GF(2) linear algebra.

Matrices are stored sparsely (sorted column indices per row) and converted
on demand to a packed representation (64 columns per uint64 word) for
elimination-heavy work such as rank, nullspace, and solving.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_WORD = 64


def _n_words(cols: int) -> int:
    return max(1, (cols + _WORD - 1) // _WORD)


def pack_rows(row_supports, cols: int) -> np.ndarray:
    """Pack an iterable of column-index iterables into a uint64 bit matrix."""
    out = np.zeros((len(row_supports), _n_words(cols)), dtype=np.uint64)
    for i, support in enumerate(row_supports):
        for c in support:
            out[i, c >> 6] |= np.uint64(1) << np.uint64(c & 63)
    return out


def pack_vector(bits, cols: int) -> np.ndarray:
    """Pack a 0/1 vector (or index iterable) into uint64 words."""
    v = np.zeros(_n_words(cols), dtype=np.uint64)
    arr = np.asarray(bits)
    idx = np.flatnonzero(arr) if arr.ndim and arr.size == cols else np.asarray(list(bits))
    for c in idx:
        v[int(c) >> 6] |= np.uint64(1) << np.uint64(int(c) & 63)
    return v


def unpack_vector(words: np.ndarray, cols: int) -> np.ndarray:
    """Expand packed words back to a uint8 0/1 vector of length cols."""
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")
    return bits[:cols].astype(np.uint8)


def popcount_words(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum())


def rref_packed(mat: np.ndarray, cols: int):
    """Reduced row echelon form of a packed matrix.

    Pivots are chosen column-ascending, taking the lowest remaining row,
    so the result is deterministic. Returns (rref matrix, pivot columns).
    """
    work = mat.copy()
    n_rows = work.shape[0]
    pivots = []
    prow = 0
    for col in range(cols):
        if prow >= n_rows:
            break
        w, b = col >> 6, np.uint64(col & 63)
        colbits = (work[prow:, w] >> b) & np.uint64(1)
        nz = np.flatnonzero(colbits)
        if nz.size == 0:
            continue
        piv = prow + int(nz[0])
        if piv != prow:
            work[[prow, piv]] = work[[piv, prow]]
        hit = np.flatnonzero((work[:, w] >> b) & np.uint64(1))
        hit = hit[hit != prow]
        if hit.size:
            work[hit] ^= work[prow]
        pivots.append(col)
        prow += 1
    return work[: len(pivots)], pivots


class BinMatrix:
    """Immutable binary matrix over GF(2).

    Row supports are tuples of strictly increasing column indices; all
    derived views (dense, packed, transpose) are cached after first use.
    """

    __slots__ = ("rows", "cols", "_row_supports", "_packed", "_dense", "_transpose", "_col_supports")

    def __init__(self, rows: int, cols: int, entries):
        if rows < 0 or cols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        supports = [[] for _ in range(rows)]
        seen = set()
        for r, c in entries:
            if not (0 <= r < rows and 0 <= c < cols):
                raise ValueError(f"entry ({r},{c}) out of bounds for {rows}x{cols}")
            if (r, c) in seen:
                raise ValueError(f"duplicate entry ({r},{c})")
            seen.add((r, c))
            supports[r].append(c)
        self.rows = rows
        self.cols = cols
        self._row_supports = tuple(tuple(sorted(s)) for s in supports)
        self._packed = None
        self._dense = None
        self._transpose = None
        self._col_supports = None

    @classmethod
    def from_rows(cls, row_supports, cols: int) -> "BinMatrix":
        entries = [(r, c) for r, sup in enumerate(row_supports) for c in sup]
        return cls(len(row_supports), cols, entries)

    @classmethod
    def from_dense(cls, arr) -> "BinMatrix":
        a = np.asarray(arr, dtype=np.uint8) & 1
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        rr, cc = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], zip(rr.tolist(), cc.tolist()))

    @classmethod
    def identity(cls, n: int) -> "BinMatrix":
        return cls(n, n, ((i, i) for i in range(n)))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BinMatrix":
        return cls(rows, cols, ())

    @property
    def entries(self) -> frozenset:
        return frozenset((r, c) for r, sup in enumerate(self._row_supports) for c in sup)

    def row_support(self, r: int) -> tuple:
        return self._row_supports[r]

    def col_support(self, c: int) -> tuple:
        if self._col_supports is None:
            cols = [[] for _ in range(self.cols)]
            for r, sup in enumerate(self._row_supports):
                for j in sup:
                    cols[j].append(r)
            self._col_supports = tuple(tuple(s) for s in cols)
        return self._col_supports[c]

    def row_weights(self) -> np.ndarray:
        return np.array([len(s) for s in self._row_supports], dtype=np.int64)

    def col_weights(self) -> np.ndarray:
        w = np.zeros(self.cols, dtype=np.int64)
        for sup in self._row_supports:
            for c in sup:
                w[c] += 1
        return w

    def to_dense(self) -> np.ndarray:
        if self._dense is None:
            d = np.zeros((self.rows, self.cols), dtype=np.uint8)
            for r, sup in enumerate(self._row_supports):
                d[r, list(sup)] = 1
            self._dense = d
        return self._dense.copy()

    def to_packed(self) -> np.ndarray:
        if self._packed is None:
            self._packed = pack_rows(self._row_supports, self.cols)
        return self._packed.copy()

    def transpose(self) -> "BinMatrix":
        if self._transpose is None:
            entries = [(c, r) for r, sup in enumerate(self._row_supports) for c in sup]
            self._transpose = BinMatrix(self.cols, self.rows, entries)
        return self._transpose

    def __matmul__(self, other: "BinMatrix") -> "BinMatrix":
        return matmul(self, other)

    def mul_vec(self, vec) -> np.ndarray:
        """Matrix-vector product mod 2; vec is a 0/1 vector of length cols."""
        v = np.asarray(vec, dtype=np.uint8)
        if v.shape != (self.cols,):
            raise ValueError(f"vector length {v.shape} incompatible with {self.cols} columns")
        packed_v = pack_vector(v, self.cols)
        prod = self.to_packed() & packed_v
        return (np.bitwise_count(prod).sum(axis=1) & 1).astype(np.uint8)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BinMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self._row_supports == other._row_supports
        )

    def __hash__(self):
        return hash((self.rows, self.cols, self._row_supports))

    def __repr__(self):
        nnz = sum(len(s) for s in self._row_supports)
        return f"BinMatrix({self.rows}x{self.cols}, nnz={nnz})"

    @staticmethod
    def vstack(mats) -> "BinMatrix":
        mats = list(mats)
        cols = mats[0].cols
        if any(m.cols != cols for m in mats):
            raise ValueError("column counts differ")
        supports = []
        for m in mats:
            supports.extend(m._row_supports)
        return BinMatrix.from_rows(supports, cols)

    @staticmethod
    def hstack(mats) -> "BinMatrix":
        mats = list(mats)
        rows = mats[0].rows
        if any(m.rows != rows for m in mats):
            raise ValueError("row counts differ")
        supports = [[] for _ in range(rows)]

        offset = 0
        for m in mats:
            for r, sup in enumerate(m._row_supports):
                supports[r].extend(c + offset for c in sup)
            offset += m.cols
        return BinMatrix.from_rows(supports, offset)


def rank(m: BinMatrix) -> int:
    """GF(2) rank via packed Gaussian elimination."""
    _, pivots = rref_packed(m.to_packed(), m.cols)
    return len(pivots)


def nullspace_basis(m: BinMatrix) -> list:
    """Basis of the right nullspace, as uint8 0/1 vectors.

    Returns exactly cols - rank(m) vectors; each free column yields one
    basis vector with a 1 there and pivot coordinates determined by rref.
    """
    red, pivots = rref_packed(m.to_packed(), m.cols)
    pivot_set = set(pivots)
    basis = []
    for f in range(m.cols):
        if f in pivot_set:
            continue
        v = np.zeros(m.cols, dtype=np.uint8)
        v[f] = 1
        w, b = f >> 6, np.uint64(f & 63)
        for i, p in enumerate(pivots):
            if (red[i, w] >> b) & np.uint64(1):
                v[p] = 1
        basis.append(v)
    return basis


def matmul(a: BinMatrix, b: BinMatrix) -> BinMatrix:
    """Product mod 2. Raises on inner-dimension mismatch."""
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.rows}x{a.cols} @ {b.rows}x{b.cols}")
    ap = a.to_packed()
    btp = b.transpose().to_packed()
    dense = np.zeros((a.rows, b.cols), dtype=np.uint8)
    for i in range(a.rows):
        acc = np.bitwise_count(ap[i][None, :] & btp).sum(axis=1)
        dense[i] = acc & 1
    return BinMatrix.from_dense(dense)


def solve(m: BinMatrix, s):
    """Any x with m @ x = s, or None when the system is inconsistent."""
    s = np.asarray(s, dtype=np.uint8)
    if s.shape != (m.rows,):
        raise ValueError(f"syndrome length {s.shape} incompatible with {m.rows} rows")
    aug_cols = m.cols + 1
    aug = np.zeros((m.rows, _n_words(aug_cols)), dtype=np.uint64)
    packed = m.to_packed()
    aug[:, : packed.shape[1]] = packed
    for r in np.flatnonzero(s):
        aug[int(r), m.cols >> 6] |= np.uint64(1) << np.uint64(m.cols & 63)
    red, pivots = rref_packed(aug, aug_cols)
    if m.cols in pivots:
        return None
    x = np.zeros(m.cols, dtype=np.uint8)
    w, b = m.cols >> 6, np.uint64(m.cols & 63)
    for i, p in enumerate(pivots):
        if (red[i, w] >> b) & np.uint64(1):
            x[p] = 1
    return x


def in_rowspan(basis_rref: np.ndarray, pivots, vec_words: np.ndarray) -> bool:
    """Membership test against a precomputed rref basis (packed)."""
    v = vec_words.copy()
    for i, p in enumerate(pivots):
        if (v[p >> 6] >> np.uint64(p & 63)) & np.uint64(1):
            v ^= basis_rref[i]
    return not v.any()


# MacKay alist I/O. Layout: "n m", max column/row weights, per-column then
# per-row weight lists, then 1-based index lists zero-padded to the maxima.

def write_alist(m: BinMatrix, path) -> None:
    col_sup = [list(m.col_support(c)) for c in range(m.cols)]
    row_sup = [list(s) for s in (m.row_support(r) for r in range(m.rows))]
    max_col = max((len(s) for s in col_sup), default=0)
    max_row = max((len(s) for s in row_sup), default=0)
    lines = [
        f"{m.cols} {m.rows}",
        f"{max_col} {max_row}",
        " ".join(str(len(s)) for s in col_sup),
        " ".join(str(len(s)) for s in row_sup),
    ]
    for s in col_sup:
        padded = [i + 1 for i in s] + [0] * (max_col - len(s))
        lines.append(" ".join(str(i) for i in padded))
    for s in row_sup:
        padded = [j + 1 for j in s] + [0] * (max_row - len(s))
        lines.append(" ".join(str(j) for j in padded))
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path) -> BinMatrix:
    tokens = Path(path).read_text().split("\n")
    head = tokens[0].split()
    n, mrows = int(head[0]), int(head[1])
    entries = []
    # column lists occupy lines 4..4+n; row lists follow and are redundant
    for c in range(n):
        for tok in tokens[4 + c].split():
            i = int(tok)
            if i > 0:
                entries.append((i - 1, c))
    m = BinMatrix(mrows, n, entries)
    # verify the row section agrees, so round-trips are bit-exact
    for r in range(mrows):
        stated = tuple(int(t) - 1 for t in tokens[4 + n + r].split() if int(t) > 0)
        if stated != m.row_support(r):
            raise ValueError(f"alist row section disagrees with column section at row {r}")
    return m
