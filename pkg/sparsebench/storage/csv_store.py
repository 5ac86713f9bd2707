from pathlib import Path
from typing import Iterable, List, Union

import pandas as pd
from pydantic import ValidationError

from sparsebench.core.exceptions import DataFormatError, StorageError
from sparsebench.schemas.experiment import CSV_COLUMNS, ResultRow


def rows_to_frame(rows: Iterable[ResultRow]) -> pd.DataFrame:
    """
    Text frame with the result header; every cell is already rendered.
    """
    return pd.DataFrame([row.to_record() for row in rows], columns=list(CSV_COLUMNS), dtype=str)


def persist(rows: Iterable[ResultRow], path: Union[str, Path]) -> Path:
    """
    Write result rows to ``path`` (header always present, empty cells for
    missing-by-design fields).
    """
    path = Path(path)
    frame = rows_to_frame(rows)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise StorageError(f"Could not write results ({e.strerror or e})", path=path) from e
    return path


def load(path: Union[str, Path]) -> List[ResultRow]:
    """
    Read rows written by ``persist``; cells come back field-exact.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as e:
        raise StorageError(f"Could not read results ({e.strerror or e})", path=path) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFormatError(f"Malformed results file {path}: {e}") from e

    header = tuple(frame.columns)
    if header != CSV_COLUMNS:
        raise DataFormatError(
            f"Unexpected header in {path}",
            row=1,
            expected=",".join(CSV_COLUMNS),
        )

    rows = []
    for i, record in enumerate(frame.to_dict(orient="records")):
        try:
            rows.append(ResultRow.from_record(record))
        except (ValidationError, ValueError) as e:
            raise DataFormatError(f"Bad result row in {path}: {e}", row=i + 2) from e
    return rows
