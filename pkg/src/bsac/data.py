"""CSV ingestion, fit/apply preprocessing, and the two credit dataset pipelines."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date, datetime

import numpy as np

log = logging.getLogger(__name__)

NUMERIC, CATEGORICAL, DATE = "numeric", "categorical", "date"
DATE_FORMATS = ("%b-%Y", "%Y-%m-%d", "%b-%y", "%Y-%m")


@dataclass
class Column:
    """One typed column.

    numeric: float64 with NaN for missing; categorical: object array of str
    with None for missing; date: object array of ``datetime.date`` or None.
    """

    kind: str
    values: np.ndarray

    def missing(self) -> np.ndarray:
        if self.kind == NUMERIC:
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)

    def take(self, idx) -> "Column":
        return Column(self.kind, self.values[idx])


@dataclass
class RawTable:
    names: list
    columns: dict

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("column names must be unique")
        lengths = {len(self.columns[n].values) for n in self.names}
        if len(lengths) > 1:
            raise ValueError("table is not rectangular")

    @property
    def n_rows(self) -> int:
        return len(self.columns[self.names[0]].values) if self.names else 0

    def __contains__(self, name) -> bool:
        return name in self.columns

    def __getitem__(self, name) -> Column:
        return self.columns[name]

    def take(self, idx) -> "RawTable":
        idx = np.asarray(idx)
        return RawTable(list(self.names), {n: self.columns[n].take(idx) for n in self.names})

    def select(self, names) -> "RawTable":
        return RawTable(list(names), {n: self.columns[n] for n in names})

    def drop(self, names) -> "RawTable":
        gone = set(names)
        return self.select([n for n in self.names if n not in gone])

    def with_column(self, name, column: Column) -> "RawTable":
        names = self.names if name in self.columns else self.names + [name]
        return RawTable(list(names), {**self.columns, name: column})

    def rename(self, mapping) -> "RawTable":
        names = [mapping.get(n, n) for n in self.names]
        return RawTable(names, {mapping.get(n, n): c for n, c in self.columns.items()})


def parse_date(text: str, formats=DATE_FORMATS) -> date:
    for fmt in formats:
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date {text!r}")


def _infer_column(name, cells, date_columns, date_formats) -> Column:
    raw = [c.strip() for c in cells]
    if name in date_columns:
        cache: dict = {}
        out = np.empty(len(raw), dtype=object)
        for i, c in enumerate(raw):
            if not c:
                out[i] = None
                continue
            if c not in cache:
                try:
                    cache[c] = parse_date(c, date_formats)
                except ValueError:
                    raise ValueError(f"column {name!r}: unparseable date {c!r}") from None
            out[i] = cache[c]
        return Column(DATE, out)
    try:
        values = np.array([float(c) if c else np.nan for c in raw], dtype=np.float64)
        return Column(NUMERIC, values)
    except ValueError:
        pass
    out = np.empty(len(raw), dtype=object)
    out[:] = [c if c else None for c in raw]
    return Column(CATEGORICAL, out)


def load_csv(path, date_columns=(), date_formats=DATE_FORMATS, usecols=None,
             row_filter=None, skip_rows: int = 0) -> RawTable:
    """Read a UTF-8, comma-separated file with a header row.

    Columns that parse entirely as numbers become numeric, configured
    ``date_columns`` become dates, everything else categorical; empty cells
    are missing.  ``row_filter`` receives each row as a ``{name: text}`` dict
    and drops it when false, which keeps memory bounded on large files.
    """
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        for _ in range(skip_rows):
            next(reader, None)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise ValueError(f"{path}: duplicate column names {dupes}")
        keep = header if usecols is None else [h for h in header if h in set(usecols)]
        if usecols is not None:
            absent = [c for c in usecols if c not in header]
            if absent:
                raise ValueError(f"{path}: missing columns {absent}")
        positions = [header.index(h) for h in keep]
        cells: list[list[str]] = [[] for _ in keep]
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: line {reader.line_num}: expected {len(header)} fields, got {len(row)}"
                )
            if row_filter is not None and not row_filter(dict(zip(header, row))):
                continue
            for store, pos in zip(cells, positions):
                store.append(row[pos])
    columns = {name: _infer_column(name, col, set(date_columns), date_formats)
               for name, col in zip(keep, cells)}
    return RawTable(list(keep), columns)


def drop_high_missing(table: RawTable, threshold: float = 0.5):
    """Drop columns whose missing fraction is strictly above ``threshold``.

    Returns ``(table, dropped_names)``.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    n = table.n_rows
    dropped = [name for name in table.names
               if n and table[name].missing().sum() / n > threshold]
    if dropped:
        log.info("dropping %d mostly-missing columns: %s", len(dropped), ", ".join(dropped))
    return table.drop(dropped), dropped


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None
    feature_names: list

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise ValueError(
                f"feature matrix {self.features.shape} does not match {len(self.feature_names)} names"
            )
        if self.labels is not None:
            self.labels = np.asarray(self.labels).astype(np.int64).reshape(-1)
            if self.labels.shape[0] != self.features.shape[0]:
                raise ValueError("labels and features disagree on row count")
            if not np.all((self.labels == 0) | (self.labels == 1)):
                raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "Dataset":
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.features[idx], labels, list(self.feature_names))


@dataclass
class Schema:
    """Which columns feed the model and how.

    ``categorical`` maps a column to a fixed category list, or to None to use
    the categories observed when fitting.
    """

    continuous: list
    categorical: dict = field(default_factory=dict)
    target: str | None = None

    @property
    def source_columns(self) -> list:
        return list(self.continuous) + list(self.categorical)


@dataclass
class PreprocessParams:
    numeric: dict
    categorical: dict
    feature_names: list
    target: str | None = None

    def to_dict(self) -> dict:
        return {
            "numeric": {k: [lo, hi] for k, (lo, hi) in self.numeric.items()},
            "categorical": {k: list(v) for k, v in self.categorical.items()},
            "feature_names": list(self.feature_names),
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessParams":
        return cls(
            numeric={k: (float(lo), float(hi)) for k, (lo, hi) in d["numeric"].items()},
            categorical={k: list(v) for k, v in d["categorical"].items()},
            feature_names=list(d["feature_names"]),
            target=d.get("target"),
        )

    @property
    def source_columns(self) -> list:
        return list(self.numeric) + list(self.categorical)


def _category_strings(column: Column) -> np.ndarray:
    if column.kind == NUMERIC:
        out = np.empty(len(column.values), dtype=object)
        out[:] = [None if np.isnan(v) else f"{v:g}" for v in column.values]
        return out
    if column.kind == DATE:
        out = np.empty(len(column.values), dtype=object)
        out[:] = [None if v is None else v.isoformat() for v in column.values]
        return out
    return column.values


def _category_order(value: str):
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


def _numeric_values(table: RawTable, name: str) -> np.ndarray:
    col = table[name]
    if col.kind != NUMERIC:
        raise ValueError(f"column {name!r} must be numeric, found {col.kind}")
    return col.values


def fit_preprocess(table: RawTable, schema: Schema) -> PreprocessParams:
    """Fit min-max ranges and category lists; the target column is never read."""
    absent = [c for c in schema.source_columns if c not in table]
    if absent:
        raise ValueError(f"missing columns: {absent}")
    numeric = {}
    for name in schema.continuous:
        v = _numeric_values(table, name)
        finite = v[~np.isnan(v)]
        if finite.size == 0:
            raise ValueError(f"column {name!r} has no values to fit")
        numeric[name] = (float(finite.min()), float(finite.max()))
    categorical = {}
    for name, fixed in schema.categorical.items():
        if fixed is not None:
            cats = [str(c) for c in fixed]
        else:
            observed = {c for c in _category_strings(table[name]) if c is not None}
            cats = sorted(observed, key=_category_order)
        if not cats:
            raise ValueError(f"column {name!r} has no categories")
        categorical[name] = cats
    names = list(numeric) + [f"{col}_{cat}" for col, cats in categorical.items() for cat in cats]
    return PreprocessParams(numeric, categorical, names, schema.target)


def apply_preprocess(table: RawTable, params: PreprocessParams) -> Dataset:
    """Min-max scale and one-hot encode per ``params``.

    Values outside the fitted range are not clipped; unseen or missing
    categories give an all-zero indicator block.  Labels are read from the
    target column when the table has it.
    """
    absent = [c for c in params.source_columns if c not in table]
    if absent:
        raise ValueError(f"missing columns: {absent}")
    n = table.n_rows
    blocks = []
    for name, (lo, hi) in params.numeric.items():
        v = _numeric_values(table, name)
        if np.isnan(v).any():
            raise ValueError(f"column {name!r} has missing values")
        blocks.append(((v - lo) / (hi - lo) if hi > lo else np.zeros(n)).reshape(-1, 1))
    for name, cats in params.categorical.items():
        values = _category_strings(table[name])
        lookup = {c: j for j, c in enumerate(cats)}
        block = np.zeros((n, len(cats)))
        for i, v in enumerate(values):
            j = lookup.get(v)
            if j is not None:
                block[i, j] = 1.0
        blocks.append(block)
    features = np.hstack(blocks) if blocks else np.zeros((n, 0))
    labels = None
    if params.target is not None and params.target in table:
        labels = _numeric_values(table, params.target)
    return Dataset(features, labels, list(params.feature_names))


def fit_minmax(features: np.ndarray):
    return features.min(axis=0), features.max(axis=0)


def apply_minmax(features: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (features - lo) / safe, 0.0)


# --- Taiwan (UCI "default of credit card clients") ---------------------------

TAIWAN_TARGET = "default payment next month"
TAIWAN_TARGET_ALIASES = (TAIWAN_TARGET, "default.payment.next.month", "default_payment_next_month", "Y")
PAY_STATUS = ["PAY_0", "PAY_2", "PAY_3", "PAY_4", "PAY_5", "PAY_6"]
TAIWAN_CONTINUOUS = (
    ["LIMIT_BAL", "AGE"]
    + PAY_STATUS
    + [f"BILL_AMT{i}" for i in range(1, 7)]
    + [f"PAY_AMT{i}" for i in range(1, 7)]
)
# Category codes as they occur in the UCI file (EDUCATION 0/5/6 and MARRIAGE 0
# are undocumented but present).  SEX is binary and contributes one indicator.
TAIWAN_CATEGORIES = {
    "SEX": ["2"],
    "EDUCATION": ["0", "1", "2", "3", "4", "5", "6"],
    "MARRIAGE": ["0", "1", "2", "3"],
}
TAIWAN_SCHEMA = Schema(TAIWAN_CONTINUOUS, TAIWAN_CATEGORIES, TAIWAN_TARGET)


def load_taiwan_csv(path) -> RawTable:
    """Load the Taiwan file, skipping the ``X1..X23,Y`` code row of the UCI export."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        first = next(csv.reader(fh), [])
    codes = {c.strip() for c in first}
    skip = 1 if "X1" in codes and "LIMIT_BAL" not in codes else 0
    return load_csv(path, skip_rows=skip)


def clean_taiwan(table: RawTable, require_target: bool = True):
    """Normalize column names; returns ``(table, schema)``."""
    mapping = {"PAY_1": "PAY_0"}
    for alias in TAIWAN_TARGET_ALIASES:
        if alias in table and alias != TAIWAN_TARGET:
            mapping[alias] = TAIWAN_TARGET
    table = table.rename(mapping)
    if "ID" in table:
        table = table.drop(["ID"])
    needed = TAIWAN_SCHEMA.source_columns + ([TAIWAN_TARGET] if require_target else [])
    absent = [c for c in needed if c not in table]
    if absent:
        raise ValueError(f"Taiwan table is missing columns: {absent}")
    return table, TAIWAN_SCHEMA


def prepare_taiwan(table: RawTable) -> Dataset:
    table, schema = clean_taiwan(table)
    data = apply_preprocess(table, fit_preprocess(table, schema))
    log.info("Taiwan: %d rows, %d features", len(data), data.n_features)
    return data


# --- Lending Club accepted loans ----------------------------------------------

LC_NUMERIC_SOURCE = [
    "loan_amnt", "acc_now_delinq", "int_rate", "installment", "annual_inc", "emp_length",
    "dti", "delinq_2yrs", "inq_last_6mths", "open_acc", "pub_rec", "revol_util", "total_acc",
    "chargeoff_within_12_mths", "delinq_amnt", "mort_acc", "pub_rec_bankruptcies", "tax_liens",
]
LC_CONTINUOUS = LC_NUMERIC_SOURCE + ["average_fico", "credit_history"]
LC_CATEGORICAL = ["grade", "sub_grade", "home_ownership", "purpose",
                  "verification_status", "initial_list_status"]
LC_TARGET = "loan_status"
LC_DATES = ["issue_d", "earliest_cr_line"]
LC_SOURCE_COLUMNS = (LC_NUMERIC_SOURCE + LC_CATEGORICAL + LC_DATES
                     + ["fico_range_low", "fico_range_high", "term", LC_TARGET])
LC_STATUS = {"Fully Paid": 0, "Charged Off": 1, "Default": 1}
LC_ISSUED_BEFORE = date(2016, 3, 1)


def parse_emp_length(text):
    """'< 1 year' -> 0, '10+ years' -> 10, 'n/a' -> None."""
    if text is None:
        return None
    t = str(text).strip().lower()
    if not t or t == "n/a":
        return None
    if t.startswith("<"):
        return 0.0
    digits = "".join(ch for ch in t if ch.isdigit())
    return float(digits) if digits else None


def _term_months(text) -> float | None:
    if text is None:
        return None
    digits = "".join(ch for ch in str(text) if ch.isdigit())
    return float(digits) if digits else None


def lending_club_row_filter(row: dict) -> bool:
    """Cheap load-time filter matching the term/status/date predicates."""
    if _term_months(row.get("term")) != 36 or row.get(LC_TARGET, "").strip() not in LC_STATUS:
        return False
    try:
        return parse_date(row.get("issue_d", "").strip()) < LC_ISSUED_BEFORE
    except ValueError:
        return True  # let prepare_lending_club report it


def load_lending_club_csv(path, training: bool = True) -> RawTable:
    """Load only the columns the pipeline uses; training mode pre-filters rows."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        header = {h.strip() for h in next(csv.reader(fh), [])}
    if "sub_grade" not in header and "subgrade" in header:
        cols = [("subgrade" if c == "sub_grade" else c) for c in LC_SOURCE_COLUMNS]
    else:
        cols = LC_SOURCE_COLUMNS
    usecols = [c for c in cols if c in header or (training and c in ("term", LC_TARGET))]
    return load_csv(path, date_columns=LC_DATES, usecols=usecols,
                    row_filter=lending_club_row_filter if training else None)


def _to_numeric(column: Column, parse=None) -> Column:
    if column.kind == NUMERIC:
        return column
    if parse is None:
        def parse(v):
            return float(str(v).strip().rstrip("%")) if v is not None else None
    vals = [parse(v) for v in column.values]
    return Column(NUMERIC, np.array([np.nan if v is None else v for v in vals], dtype=np.float64))


def _to_date(column: Column, name: str) -> Column:
    if column.kind == DATE:
        return column
    out = np.empty(len(column.values), dtype=object)
    for i, v in enumerate(column.values):
        if v is None or (isinstance(v, float) and np.isnan(v)):
            out[i] = None
            continue
        try:
            out[i] = parse_date(str(v).strip())
        except ValueError:
            raise ValueError(f"column {name!r}: unparseable date {v!r}") from None
    return Column(DATE, out)


def months_between(start: date, end: date) -> int:
    return (end.year - start.year) * 12 + (end.month - start.month)


def clean_lending_club(table: RawTable, require_target: bool = True):
    """Filter, engineer and type the Lending Club columns; returns ``(table, schema)``.

    Training mode keeps 36-month loans issued before March 2016 whose status is
    resolved; inference mode keeps every row.  Rows with any missing model
    input are dropped in training mode and rejected in inference mode.
    """
    if "subgrade" in table and "sub_grade" not in table:
        table = table.rename({"subgrade": "sub_grade"})
    needed = [c for c in LC_SOURCE_COLUMNS if c not in ("term", LC_TARGET)]
    if require_target:
        needed += ["term", LC_TARGET]
    absent = [c for c in needed if c not in table]
    if absent:
        raise ValueError(f"Lending Club table is missing columns: {absent}")

    issue = _to_date(table["issue_d"], "issue_d")
    earliest = _to_date(table["earliest_cr_line"], "earliest_cr_line")
    if require_target:
        status = _category_strings(table[LC_TARGET])
        term = np.array([_term_months(v) for v in _category_strings(table["term"])], dtype=object)
        keep = np.array([
            t == 36 and s is not None and s.strip() in LC_STATUS and d is not None and d < LC_ISSUED_BEFORE
            for t, s, d in zip(term, status, issue.values)
        ], dtype=bool)
        log.info("Lending Club filter keeps %d of %d rows", keep.sum(), table.n_rows)
        rows = np.flatnonzero(keep)
        table, issue, earliest = table.take(rows), issue.take(rows), earliest.take(rows)
        labels = np.array([LC_STATUS[s.strip()] for s in _category_strings(table[LC_TARGET])], dtype=np.float64)
        table = table.with_column(LC_TARGET, Column(NUMERIC, labels))

    for name in LC_NUMERIC_SOURCE:
        parse = parse_emp_length if name == "emp_length" else None
        table = table.with_column(name, _to_numeric(table[name], parse))
    lo = _to_numeric(table["fico_range_low"]).values
    hi = _to_numeric(table["fico_range_high"]).values
    table = table.with_column("average_fico", Column(NUMERIC, (lo + hi) / 2.0))
    history = np.array([
        np.nan if (a is None or b is None) else months_between(a, b)
        for a, b in zip(earliest.values, issue.values)
    ], dtype=np.float64)
    table = table.with_column("credit_history", Column(NUMERIC, history))
    for name in LC_CATEGORICAL:
        table = table.with_column(name, Column(CATEGORICAL, _category_strings(table[name])))

    model_cols = LC_CONTINUOUS + LC_CATEGORICAL
    table, dropped = drop_high_missing(table.select(model_cols + ([LC_TARGET] if require_target else [])))
    lost = [c for c in dropped if c in model_cols]
    if lost:
        raise ValueError(f"required Lending Club columns are mostly missing: {lost}")
    incomplete = np.zeros(table.n_rows, dtype=bool)
    for name in model_cols:
        incomplete |= table[name].missing()
    if incomplete.any():
        if not require_target:
            raise ValueError(f"{incomplete.sum()} rows have missing model inputs")
        log.info("dropping %d rows with missing model inputs", incomplete.sum())
        table = table.take(np.flatnonzero(~incomplete))
    schema = Schema(LC_CONTINUOUS, {c: None for c in LC_CATEGORICAL}, LC_TARGET)
    return table, schema


def prepare_lending_club(table: RawTable) -> Dataset:
    table, schema = clean_lending_club(table)
    data = apply_preprocess(table, fit_preprocess(table, schema))
    log.info("Lending Club: %d rows, %d features (reference width 81)", len(data), data.n_features)
    return data


# --- generic and prepared files -----------------------------------------------

def clean_generic(table: RawTable, target: str = "target", require_target: bool = True):
    """Numeric columns are continuous, all others categorical."""
    if require_target and target not in table:
        raise ValueError(f"target column {target!r} not found")
    if target in table and table[target].kind != NUMERIC:
        raise ValueError(f"target column {target!r} must hold 0/1 values")
    cols = [n for n in table.names if n != target]
    schema = Schema(
        [n for n in cols if table[n].kind == NUMERIC],
        {n: None for n in cols if table[n].kind != NUMERIC},
        target,
    )
    return table, schema


PREPARED_LABEL = "label"


def write_prepared(dataset: Dataset, dest) -> None:
    """Features plus a trailing ``label`` column; ``dest`` is a path or text stream."""
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            return write_prepared(dataset, fh)
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(list(dataset.feature_names) + [PREPARED_LABEL])
    for row, y in zip(dataset.features, dataset.labels):
        w.writerow([repr(float(v)) for v in row] + [int(y)])


def load_prepared(path) -> Dataset:
    table = load_csv(path)
    names = [n for n in table.names if n != PREPARED_LABEL]
    bad = [n for n in table.names if table[n].kind != NUMERIC]
    if bad or PREPARED_LABEL not in table:
        raise ValueError(f"{path} is not a prepared dataset (non-numeric: {bad})")
    feats = np.column_stack([table[n].values for n in names])
    return Dataset(feats, table[PREPARED_LABEL].values, names)
