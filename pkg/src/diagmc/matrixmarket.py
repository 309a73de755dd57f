"""Matrix Market ingestion for symmetric matrices.

Supports the ``coordinate`` and ``array`` formats with ``real`` or
``integer`` fields and ``general`` or ``symmetric`` qualifiers.  General
files must contain symmetric entries (checked to 1e-12 relative); duplicate
coordinate entries are summed, following the format's convention.  Parse
failures carry the offending line number.
"""

import numpy as np

from .operators import CooSymmetric, DenseSymmetric, SymmetricOperator

__all__ = ["MatrixMarketError", "load_matrix_market"]

_DENSE_LIMIT = 10_000
_SYM_TOL = 1e-12


class MatrixMarketError(ValueError):
    """Malformed or unsupported Matrix Market content."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _parse_header(text: str, lineno: int) -> tuple[str, str, str]:
    tokens = text.strip().split()
    if len(tokens) != 5 or tokens[0] != "%%MatrixMarket" or tokens[1].lower() != "matrix":
        raise MatrixMarketError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", lineno)
    fmt, field, symmetry = (t.lower() for t in tokens[2:5])
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"unsupported format {fmt!r}", lineno)
    if field not in ("real", "integer", "double"):
        raise MatrixMarketError(f"unsupported field {field!r}; need real or integer values", lineno)
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", lineno)
    return fmt, field, symmetry


def _data_lines(lines: list[str], start: int):
    for lineno in range(start, len(lines)):
        stripped = lines[lineno].strip()
        if not stripped or stripped.startswith("%"):
            continue
        yield lineno + 1, stripped


def _check_general_symmetry(m: np.ndarray, entry_lines: dict) -> None:
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    gap = np.abs(m - m.T)
    bad = np.argwhere(gap > _SYM_TOL * max(scale, 1e-300))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        line = entry_lines.get((i, j)) or entry_lines.get((j, i))
        raise MatrixMarketError(
            f"asymmetric entries: A[{i + 1},{j + 1}]={m[i, j]:g} vs "
            f"A[{j + 1},{i + 1}]={m[j, i]:g}",
            line,
        )


def load_matrix_market(path) -> SymmetricOperator:
    """Parse a Matrix Market file into a symmetric operator.

    Returns a :class:`DenseSymmetric` (packed lower triangle) for
    n <= 10^4 and a :class:`CooSymmetric` above that.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    fmt, field, symmetry = _parse_header(lines[0], 1)
    data = _data_lines(lines, 1)

    try:
        lineno, size_line = next(data)
    except StopIteration:
        raise MatrixMarketError("missing size line", len(lines)) from None
    size_tokens = size_line.split()
    expected = 3 if fmt == "coordinate" else 2
    if len(size_tokens) != expected:
        raise MatrixMarketError(
            f"size line needs {expected} integers for {fmt} format", lineno
        )
    try:
        sizes = [int(t) for t in size_tokens]
    except ValueError:
        raise MatrixMarketError("size line must contain integers", lineno) from None
    nrows, ncols = sizes[0], sizes[1]
    if nrows != ncols:
        raise MatrixMarketError(f"matrix is {nrows}x{ncols}, not square", lineno)
    n = nrows
    if n < 1:
        raise MatrixMarketError("matrix dimension must be positive", lineno)
    if n > _DENSE_LIMIT and not (fmt == "coordinate" and symmetry == "symmetric"):
        # the symmetry check for general files needs the dense matrix
        raise MatrixMarketError(
            f"n = {n} exceeds the dense cutoff {_DENSE_LIMIT}; only "
            "symmetric coordinate files are ingested sparsely",
            lineno,
        )

    parse_value = float if field != "integer" else lambda tok: float(int(tok))

    if fmt == "coordinate":
        nnz = sizes[2]
        rows, cols, vals, entry_lines = [], [], [], {}
        for lineno, text in data:
            tokens = text.split()
            if len(tokens) != 3:
                raise MatrixMarketError("coordinate entry needs 'i j value'", lineno)
            try:
                i, j = int(tokens[0]) - 1, int(tokens[1]) - 1
                value = parse_value(tokens[2])
            except ValueError:
                raise MatrixMarketError(f"cannot parse entry {text!r}", lineno) from None
            if not (0 <= i < n and 0 <= j < n):
                raise MatrixMarketError(f"index ({i + 1}, {j + 1}) out of range", lineno)
            if symmetry == "symmetric" and i < j:
                raise MatrixMarketError(
                    "entry above the diagonal in a symmetric coordinate file", lineno
                )
            rows.append(i)
            cols.append(j)
            vals.append(value)
            entry_lines.setdefault((i, j), lineno)
        if len(vals) != nnz:
            raise MatrixMarketError(
                f"declared {nnz} entries but found {len(vals)}", len(lines)
            )
        if symmetry == "symmetric" and n > _DENSE_LIMIT:
            return CooSymmetric(n, rows, cols, vals)
        m = np.zeros((n, n))
        np.add.at(m, (rows, cols), vals)
        if symmetry == "symmetric":
            lower = np.tril(m, -1)
            m = m + lower.T
        else:
            _check_general_symmetry(m, entry_lines)
            m = 0.5 * (m + m.T)
        return DenseSymmetric(m[np.tril_indices(n)], n)

    # array format: column-major dense values, lower triangle only when symmetric
    values, value_lines = [], []
    for lineno, text in data:
        for token in text.split():
            try:
                values.append(parse_value(token))
            except ValueError:
                raise MatrixMarketError(f"cannot parse value {token!r}", lineno) from None
            value_lines.append(lineno)
    if symmetry == "symmetric":
        expected_count = n * (n + 1) // 2
    else:
        expected_count = n * n
    if len(values) != expected_count:
        raise MatrixMarketError(
            f"expected {expected_count} array values, found {len(values)}", len(lines)
        )
    m = np.zeros((n, n))
    if symmetry == "symmetric":
        pos = 0
        for j in range(n):
            count = n - j
            m[j:, j] = values[pos : pos + count]
            pos += count
        lower = np.tril(m, -1)
        m = m + lower.T
    else:
        m = np.asarray(values).reshape((n, n), order="F")
        entry_lines = {
            (idx % n, idx // n): value_lines[idx] for idx in range(len(values))
        }
        _check_general_symmetry(m, entry_lines)
        m = 0.5 * (m + m.T)
    return DenseSymmetric(m[np.tril_indices(n)], n)
