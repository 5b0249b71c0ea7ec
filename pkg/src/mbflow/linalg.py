"""Exact rational dense matrices and the kernel/image/rank toolkit.

All operator algebra in this package runs over Q via :class:`fractions.Fraction`
so that structural identities (d^2 = 0, exactness of sequences) hold exactly,
not within tolerance.  Matrices are immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

Q = Fraction


class LinAlgError(Exception):
    pass


class ShapeMismatch(LinAlgError):
    pass


class SubNotContained(LinAlgError):
    """A claimed subspace vector is not in the span of the ambient vectors."""


def _q(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact rational: {x!r}")


class Matrix:
    """Immutable dense matrix over Q, row-major."""

    __slots__ = ("rows", "cols", "_data")

    def __init__(self, data: Sequence[Sequence]):
        rows = tuple(tuple(_q(x) for x in row) for row in data)
        if rows:
            w = len(rows[0])
            if any(len(r) != w for r in rows):
                raise ShapeMismatch("ragged rows")
        else:
            w = 0
        self.rows = len(rows)
        self.cols = w
        self._data = rows

    # -- constructors -------------------------------------------------
    @staticmethod
    def zeros(rows: int, cols: int) -> "Matrix":
        m = Matrix.__new__(Matrix)
        m.rows, m.cols = rows, cols
        m._data = tuple((Fraction(0),) * cols for _ in range(rows))
        return m

    @staticmethod
    def identity(n: int) -> "Matrix":
        return Matrix([[Fraction(int(i == j)) for j in range(n)] for i in range(n)])

    @staticmethod
    def from_columns(cols: Sequence[Sequence], nrows: int | None = None) -> "Matrix":
        cols = [list(c) for c in cols]
        if not cols:
            if nrows is None:
                raise ShapeMismatch("need nrows for an empty column list")
            return Matrix.zeros(nrows, 0)
        n = len(cols[0])
        if any(len(c) != n for c in cols):
            raise ShapeMismatch("columns of unequal length")
        return Matrix([[cols[j][i] for j in range(len(cols))] for i in range(n)])

    @staticmethod
    def diag(entries: Sequence) -> "Matrix":
        n = len(entries)
        return Matrix(
            [[_q(entries[i]) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
        )

    # -- basic access --------------------------------------------------
    def __getitem__(self, ij) -> Fraction:
        i, j = ij
        return self._data[i][j]

    def row(self, i: int) -> tuple:
        return self._data[i]

    def column(self, j: int) -> tuple:
        return tuple(self._data[i][j] for i in range(self.rows))

    def columns(self) -> list:
        return [self.column(j) for j in range(self.cols)]

    def tolist(self) -> list:
        return [list(r) for r in self._data]

    def is_zero(self) -> bool:
        return all(x == 0 for row in self._data for x in row)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Matrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self._data == other._data
        )

    def __hash__(self):
        return hash((self.rows, self.cols, self._data))

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(x) for x in row) for row in self._data)
        return f"Matrix({self.rows}x{self.cols}: {body})"

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other: "Matrix") -> "Matrix":
        self._same_shape(other)
        return Matrix(
            [
                [self._data[i][j] + other._data[i][j] for j in range(self.cols)]
                for i in range(self.rows)
            ]
        )

    def __sub__(self, other: "Matrix") -> "Matrix":
        self._same_shape(other)
        return Matrix(
            [
                [self._data[i][j] - other._data[i][j] for j in range(self.cols)]
                for i in range(self.rows)
            ]
        )

    def __neg__(self) -> "Matrix":
        return Matrix([[-x for x in row] for row in self._data])

    def scale(self, c) -> "Matrix":
        c = _q(c)
        return Matrix([[c * x for x in row] for row in self._data])

    def __matmul__(self, other: "Matrix") -> "Matrix":
        if self.cols != other.rows:
            raise ShapeMismatch(f"{self.rows}x{self.cols} @ {other.rows}x{other.cols}")
        ocols = other.cols
        out = []
        for i in range(self.rows):
            ri = self._data[i]
            out.append(
                [
                    sum((ri[k] * other._data[k][j] for k in range(self.cols)), Fraction(0))
                    for j in range(ocols)
                ]
            )
        return Matrix(out)

    def __mul__(self, other):
        if isinstance(other, Matrix):
            return self.__matmul__(other)
        return self.scale(other)

    __rmul__ = scale

    def transpose(self) -> "Matrix":
        return Matrix([[self._data[i][j] for i in range(self.rows)] for j in range(self.cols)])

    def mul_vector(self, v: Sequence) -> list:
        if len(v) != self.cols:
            raise ShapeMismatch("vector length != cols")
        v = [_q(x) for x in v]
        return [
            sum((self._data[i][j] * v[j] for j in range(self.cols)), Fraction(0))
            for i in range(self.rows)
        ]

    def _same_shape(self, other: "Matrix"):
        if self.rows != other.rows or self.cols != other.cols:
            raise ShapeMismatch(
                f"{self.rows}x{self.cols} vs {other.rows}x{other.cols}"
            )


def hstack(blocks: Sequence[Matrix]) -> Matrix:
    blocks = list(blocks)
    if not blocks:
        raise ShapeMismatch("hstack of nothing")
    r = blocks[0].rows
    if any(b.rows != r for b in blocks):
        raise ShapeMismatch("hstack: row counts differ")
    return Matrix([sum((list(b.row(i)) for b in blocks), []) for i in range(r)])


def vstack(blocks: Sequence[Matrix]) -> Matrix:
    blocks = list(blocks)
    if not blocks:
        raise ShapeMismatch("vstack of nothing")
    c = blocks[0].cols
    if any(b.cols != c for b in blocks):
        raise ShapeMismatch("vstack: column counts differ")
    return Matrix([row for b in blocks for row in b.tolist()])


def block_matrix(grid: Sequence[Sequence[Matrix]]) -> Matrix:
    return vstack([hstack(row) for row in grid])


# -- elimination ----------------------------------------------------------


def rank(m: Matrix) -> int:
    """Column-space dimension by fraction-free (Bareiss) elimination.

    Denominators are cleared per-row first; all intermediate values stay
    integral, so the pivot decisions are exact.
    """
    a = []
    for row in m.tolist():
        den = 1
        for x in row:
            den = den * x.denominator // _gcd(den, x.denominator)
        a.append([int(x * den) for x in row])
    nr, nc = m.rows, m.cols
    prev = 1
    r = 0
    for c in range(nc):
        piv = None
        for i in range(r, nr):
            if a[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        for i in range(r + 1, nr):
            for j in range(c + 1, nc):
                a[i][j] = (a[r][c] * a[i][j] - a[i][c] * a[r][j]) // prev
            a[i][c] = 0
        prev = a[r][c]
        r += 1
        if r == nr:
            break
    return r


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a)


def rref(m: Matrix) -> tuple[Matrix, list[int]]:
    """Reduced row-echelon form and the pivot column list (exact)."""
    a = m.tolist()
    nr, nc = m.rows, m.cols
    pivots = []
    r = 0
    for c in range(nc):
        piv = None
        for i in range(r, nr):
            if a[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(nr):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [a[i][j] - f * a[r][j] for j in range(nc)]
        pivots.append(c)
        r += 1
        if r == nr:
            break
    return Matrix(a), pivots


def kernel_basis(m: Matrix) -> list[list[Fraction]]:
    """Rational basis of the null space; rank + len(basis) == cols."""
    red, pivots = rref(m)
    free = [j for j in range(m.cols) if j not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * m.cols
        v[f] = Fraction(1)
        for r, p in enumerate(pivots):
            v[p] = -red[r, f]
        basis.append(v)
    return basis


def column_space_basis(m: Matrix) -> list[list[Fraction]]:
    _, pivots = rref(m)
    return [list(m.column(j)) for j in pivots]


def solve(a: Matrix, b: Sequence) -> list[Fraction] | None:
    """One exact solution of a x = b, or None when inconsistent."""
    b = [_q(x) for x in b]
    if len(b) != a.rows:
        raise ShapeMismatch("rhs length != rows")
    aug = hstack([a, Matrix.from_columns([b], a.rows)])
    red, pivots = rref(aug)
    if a.cols in pivots:
        return None
    x = [Fraction(0)] * a.cols
    for r, p in enumerate(pivots):
        x[p] = red[r, a.cols]
    return x


def solve_matrix(a: Matrix, b: Matrix) -> Matrix | None:
    """Exact X with a X = b, or None when some column is inconsistent."""
    cols = []
    for j in range(b.cols):
        x = solve(a, b.column(j))
        if x is None:
            return None
        cols.append(x)
    return Matrix.from_columns(cols, a.cols)


def inverse(m: Matrix) -> Matrix:
    if m.rows != m.cols:
        raise ShapeMismatch("inverse of non-square matrix")
    x = solve_matrix(m, Matrix.identity(m.rows))
    if x is None:
        raise LinAlgError("matrix is singular")
    return x


def quotient_dimension(sub: Iterable[Sequence], ambient: Iterable[Sequence]) -> int:
    """dim span(ambient) - dim span(sub), after checking sub ⊆ span(ambient)."""
    sub = [list(map(_q, v)) for v in sub]
    ambient = [list(map(_q, v)) for v in ambient]
    if not ambient:
        if any(any(x != 0 for x in v) for v in sub):
            raise SubNotContained("nonzero sub vector with empty ambient span")
        return 0
    n = len(ambient[0])
    amb = Matrix.from_columns(ambient, n)
    for v in sub:
        if len(v) != n:
            raise ShapeMismatch("sub/ambient dimension mismatch")
        if solve(amb, v) is None:
            raise SubNotContained(f"vector {v} not in ambient span")
    ra = rank(amb)
    rs = rank(Matrix.from_columns(sub, n)) if sub else 0
    return ra - rs


def lu_decomposition(m: Matrix) -> tuple[Matrix, Matrix, Matrix]:
    """Exact (P, L, U) with P m = L U.  Re-multiplication is bit-exact."""
    n, nc = m.rows, m.cols
    a = m.tolist()
    perm = list(range(n))
    lower = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    r = 0
    for c in range(nc):
        piv = None
        for i in range(r, n):
            if a[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        if piv != r:
            a[r], a[piv] = a[piv], a[r]
            perm[r], perm[piv] = perm[piv], perm[r]
            for j in range(r):
                lower[r][j], lower[piv][j] = lower[piv][j], lower[r][j]
        for i in range(r + 1, n):
            f = a[i][c] / a[r][c]
            lower[i][r] = f
            a[i] = [a[i][j] - f * a[r][j] for j in range(nc)]
        r += 1
        if r == n:
            break
    p = Matrix([[Fraction(int(perm[i] == j)) for j in range(n)] for i in range(n)])
    return p, Matrix(lower), Matrix(a)


def intersect_spans(u: Sequence[Sequence], v: Sequence[Sequence], n: int) -> list[list[Fraction]]:
    """Basis of span(u) ∩ span(v) inside Q^n."""
    if not u or not v:
        return []
    mu = Matrix.from_columns(u, n)
    mv = Matrix.from_columns(v, n)
    big = hstack([mu, (-mv)])
    out = []
    for k in kernel_basis(big):
        vec = mu.mul_vector(k[: mu.cols])
        if any(x != 0 for x in vec):
            out.append(vec)
    if not out:
        return []
    # prune to an independent set
    red, pivots = rref(Matrix.from_columns(out, n))
    return [out[j] for j in pivots]


def format_fraction(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_fraction(s: str) -> Fraction:
    return Fraction(s)
