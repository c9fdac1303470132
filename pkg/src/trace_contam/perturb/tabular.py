"""Tabular perturbation operators.

Each operator takes (table, params, rng) and returns (perturbed table, locus).
Draw order within an operator is fixed, so a given (table, op, params, seed)
always produces the same bytes. Operators that cannot apply to the given
table raise InapplicableOperator so batch harnesses can skip and log.
"""

from __future__ import annotations

from decimal import Decimal

from ..artifacts import Cell, EMPTY_CELL, TableArtifact, format_decimal
from ..rng import CounterRng
from .errors import InapplicableOperator

_CORRUPT_SYMBOLS = "#?*@!"
_LABEL_CHARS = "abcdefghijklmnopqrstuvwxyz_"
_FILLER_WORDS = ("n/a", "misc", "aux", "tmp", "spare")


def _replace_cell(rows: list[list[Cell]], r: int, c: int, raw: str) -> None:
    rows[r][c] = Cell(raw)


def _mutable_rows(table: TableArtifact) -> list[list[Cell]]:
    return [list(row) for row in table.rows]


def _rebuild(table: TableArtifact, header=None, rows=None, overrides=None) -> TableArtifact:
    return TableArtifact(
        header=tuple(header if header is not None else table.header),
        rows=tuple(tuple(row) for row in (rows if rows is not None else table.rows)),
        provenance_overrides=dict(
            overrides if overrides is not None else table.provenance_overrides
        ),
    )


def column_swap(table: TableArtifact, params: dict, rng: CounterRng):
    if table.n_cols < 2:
        raise InapplicableOperator("column_swap", "table has fewer than two columns")
    first = rng.below(table.n_cols)
    second = rng.below(table.n_cols - 1)
    if second >= first:
        second += 1
    lo, hi = sorted((first, second))
    header = list(table.header)
    header[lo], header[hi] = header[hi], header[lo]
    rows = _mutable_rows(table)
    for row in rows:
        row[lo], row[hi] = row[hi], row[lo]
    return _rebuild(table, header=header, rows=rows), [f"col:{lo}", f"col:{hi}"]


def label_corrupt(table: TableArtifact, params: dict, rng: CounterRng):
    candidates = [c for c, label in enumerate(table.header) if label]
    if not candidates:
        raise InapplicableOperator("label_corrupt", "no non-empty header labels")
    col = rng.choice(candidates)
    label = table.header[col]
    mode = rng.below(4)
    pos = rng.below(len(label))
    if mode == 1 and len(label) >= 2:  # delete one character
        mutated = label[:pos] + label[pos + 1:]
    elif mode == 2:  # insert one character
        mutated = label[:pos] + rng.choice(_LABEL_CHARS) + label[pos:]
    elif mode == 3 and len(label) >= 2:  # transpose adjacent characters
        pos = min(pos, len(label) - 2)
        mutated = label[:pos] + label[pos + 1] + label[pos] + label[pos + 2:]
        if mutated == label:
            mutated = label[:pos] + rng.choice(_LABEL_CHARS.replace(label[pos], "")) + label[pos + 1:]
    else:  # substitute one character
        pool = _LABEL_CHARS.replace(label[pos].lower(), "")
        mutated = label[:pos] + rng.choice(pool) + label[pos + 1:]
    header = list(table.header)
    header[col] = mutated
    return _rebuild(table, header=header), [f"header:{col}"]


def data_type_corrupt(table: TableArtifact, params: dict, rng: CounterRng):
    numeric = table.numeric_cells()
    if not numeric:
        raise InapplicableOperator("data_type_corrupt", "table has no numeric cells")
    k = min(int(params["cells"]), len(numeric))
    chosen = sorted(rng.sample_indices(len(numeric), k))
    rows = _mutable_rows(table)
    locus = []
    for idx in chosen:
        r, c = numeric[idx]
        raw = rows[r][c].raw
        symbol = rng.choice(_CORRUPT_SYMBOLS)
        pos = rng.below(len(raw) + 1)
        _replace_cell(rows, r, c, raw[:pos] + symbol + raw[pos:])
        locus.append(table.cell_id(r, c))
    return _rebuild(table, rows=rows), locus


def row_duplicate(table: TableArtifact, params: dict, rng: CounterRng):
    if table.n_rows < 1:
        raise InapplicableOperator("row_duplicate", "table has no data rows")
    r = rng.below(table.n_rows)
    rows = _mutable_rows(table)
    rows.insert(r + 1, list(rows[r]))
    return _rebuild(table, rows=rows), [f"row:{r}"]


def irrelevant_columns(table: TableArtifact, params: dict, rng: CounterRng):
    count = int(params["count"])
    if count < 1:
        raise InapplicableOperator("irrelevant_columns", "count must be at least 1")
    header = list(table.header)
    rows = _mutable_rows(table)
    locus = []
    for k in range(count):
        name = f"extra_{k + 1}"
        while name in header:
            name += "_x"
        header.append(name)
        for row in rows:
            if rng.below(2) == 0:
                row.append(Cell(str(rng.below(10000))))
            else:
                row.append(Cell(rng.choice(_FILLER_WORDS)))
        locus.append(f"col:{len(header) - 1}")
    return _rebuild(table, header=header, rows=rows), locus


def unit_change(table: TableArtifact, params: dict, rng: CounterRng):
    factor = Decimal(str(params["factor"]))
    numeric_cols = sorted({c for _, c in table.numeric_cells()})
    if not numeric_cols:
        raise InapplicableOperator("unit_change", "table has no numeric columns")
    col = rng.choice(numeric_cols)
    rows = _mutable_rows(table)
    for r in range(len(rows)):
        cell = rows[r][col]
        if cell.kind == "number":
            _replace_cell(rows, r, col, format_decimal(cell.value * factor))
    return _rebuild(table, rows=rows), [f"col:{col}"]


def misalignment(table: TableArtifact, params: dict, rng: CounterRng):
    can_row_shift = table.n_rows >= 2 and table.n_cols >= 1
    can_col_shift = table.n_cols >= 2 and table.n_rows >= 1
    if not can_row_shift and not can_col_shift:
        raise InapplicableOperator("misalignment", "table too small to shift a block")
    axis = rng.below(2)
    if axis == 0 and not can_row_shift:
        axis = 1
    if axis == 1 and not can_col_shift:
        axis = 0
    down = rng.below(2) == 0
    rows = _mutable_rows(table)
    if axis == 0:
        # shift a block of one column down/up by one row
        col = rng.below(table.n_cols)
        r0 = rng.below(table.n_rows - 1)
        r1 = r0 + 1 + rng.below(table.n_rows - r0 - 1)
        block = [rows[r][col] for r in range(r0, r1 + 1)]
        if down:
            shifted = [EMPTY_CELL] + block[:-1]
        else:
            shifted = block[1:] + [EMPTY_CELL]
        for offset, r in enumerate(range(r0, r1 + 1)):
            rows[r][col] = shifted[offset]
        locus = [table.cell_id(r, col) for r in range(r0, r1 + 1)]
    else:
        row = rng.below(table.n_rows)
        c0 = rng.below(table.n_cols - 1)
        c1 = c0 + 1 + rng.below(table.n_cols - c0 - 1)
        block = [rows[row][c] for c in range(c0, c1 + 1)]
        if down:
            shifted = [EMPTY_CELL] + block[:-1]
        else:
            shifted = block[1:] + [EMPTY_CELL]
        for offset, c in enumerate(range(c0, c1 + 1)):
            rows[row][c] = shifted[offset]
        locus = [table.cell_id(row, c) for c in range(c0, c1 + 1)]
    return _rebuild(table, rows=rows), locus


def header_drift(table: TableArtifact, params: dict, rng: CounterRng):
    modes = []
    if table.n_cols >= 2:
        modes.append("swap")
    if table.n_rows >= 1:
        modes.append("promote")
    if not modes:
        raise InapplicableOperator("header_drift", "table has neither two columns nor a footer row")
    mode = rng.choice(modes)
    if mode == "swap":
        first = rng.below(table.n_cols)
        second = rng.below(table.n_cols - 1)
        if second >= first:
            second += 1
        lo, hi = sorted((first, second))
        header = list(table.header)
        header[lo], header[hi] = header[hi], header[lo]
        return _rebuild(table, header=header), [f"header:{lo}", f"header:{hi}"]
    footer = table.rows[-1]
    header = [cell.raw for cell in footer]
    rows = [list(row) for row in table.rows[:-1]]
    return _rebuild(table, header=header, rows=rows), [f"row:{table.n_rows - 1}"]


def numeric_noise(table: TableArtifact, params: dict, rng: CounterRng):
    magnitude = float(params["magnitude"])
    numeric = [(r, c) for r, c in table.numeric_cells() if table.rows[r][c].value != 0]
    if not numeric:
        raise InapplicableOperator("numeric_noise", "table has no nonzero numeric cells")
    k = min(int(params["cells"]), len(numeric))
    chosen = sorted(rng.sample_indices(len(numeric), k))
    rows = _mutable_rows(table)
    locus = []
    for idx in chosen:
        r, c = numeric[idx]
        noise = (2.0 * rng.unit() - 1.0) * magnitude
        factor = Decimal(repr(1.0 + noise))
        old = rows[r][c]
        new_raw = format_decimal(old.value * factor)
        if new_raw == old.raw:  # degenerate draw; force a visible change
            new_raw = format_decimal(old.value * Decimal(repr(1.0 + magnitude / 2.0)))
        _replace_cell(rows, r, c, new_raw)
        locus.append(table.cell_id(r, c))
    return _rebuild(table, rows=rows), locus


def cell_reference_drift(table: TableArtifact, params: dict, rng: CounterRng):
    if table.n_rows < 2:
        raise InapplicableOperator("cell_reference_drift", "need at least two rows to misattribute")
    positions = [(r, c) for r in range(table.n_rows) for c in range(table.n_cols)]
    if not positions:
        raise InapplicableOperator("cell_reference_drift", "table has no cells")
    k = min(int(params["cells"]), len(positions))
    chosen = sorted(rng.sample_indices(len(positions), k))
    overrides = dict(table.provenance_overrides)
    locus = []
    for idx in chosen:
        r, c = positions[idx]
        direction = 1 if rng.below(2) == 0 else -1
        if r + direction < 0 or r + direction >= table.n_rows:
            direction = -direction
        overrides[table.cell_id(r, c)] = table.cell_id(r + direction, c)
        locus.append(table.cell_id(r, c))
    return _rebuild(table, overrides=overrides), locus
