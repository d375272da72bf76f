"""Utility functions for bandgp.

This module provides logger setup, finiteness checks and streaming CSV helpers used by the
command line.

Example:
    >>> setup_logger(log_level="DEBUG")
    >>> for block in iter_csv_blocks("train.csv", block_size=4096):
    ...     print(block.shape)
"""

import re
import sys
from pathlib import Path
from typing import Iterator
from typing import Optional
from typing import Union

import numpy as np
import pandas as pd
from loguru import logger

from bandgp.exceptions import InvalidDataError


def setup_logger(
    log_level: str = "INFO",
    log_file: Optional[Union[str, Path]] = None,
    rotation: str = "100 MB",
    retention: str = "1 week",
    format: str = "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",  # noqa: E501
) -> None:
    """Set up loguru logger with specified configuration.

    This function configures the loguru logger with custom formatting and handlers.
    It removes any existing handlers and sets up console and optional file logging.

    Args:
        log_level: The minimum logging level to display. Defaults to "INFO".
        log_file: Optional path to log file. If provided, logs will be written to this file.
        rotation: When to rotate the log file. Defaults to "100 MB".
        retention: How long to keep log files. Defaults to "1 week".
        format: The log message format string.

    Example:
        >>> setup_logger(log_level="DEBUG", log_file="logs/fit.log")
        >>> logger.info("Logger configured successfully")
    """
    logger.remove()

    logger.add(sys.stderr, format=format, level=log_level, colorize=True)

    if log_file:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)

        logger.add(
            str(log_file), format=format, level=log_level, rotation=rotation, retention=retention, compression="zip"
        )

    logger.info(f"Logger setup completed. Level: {log_level}, File: {log_file if log_file else 'None'}")


def check_finite(values: np.ndarray, name: str) -> np.ndarray:
    """Return ``values`` as a float array, rejecting NaN and infinities.

    Args:
        values: Array-like of numbers.
        name: Name used in the error message.

    Returns:
        np.ndarray: The values as ``float64``.

    Raises:
        InvalidDataError: If any entry is not finite; ``index`` is the first offending row.
    """
    array = np.asarray(values, dtype=np.float64)
    bad = ~np.isfinite(array)
    if bad.any():
        index = int(np.argwhere(bad)[0][0])
        raise InvalidDataError(f"non-finite value in {name} at index {index}", index=index)
    return array


def _data_line(path: Union[str, Path], row: int, header: bool) -> int:
    """1-based file line of the ``row``-th (0-based) non-blank data row."""
    seen = -1
    with open(path, encoding="utf-8") as handle:
        for line, text in enumerate(handle, start=1):
            if (header and line == 1) or not text.strip():
                continue
            seen += 1
            if seen == row:
                return line
    return -1


def iter_csv_blocks(
    path: Union[str, Path],
    delimiter: str = ",",
    header: bool = False,
    block_size: int = 65536,
) -> Iterator[np.ndarray]:
    """Stream a numeric CSV file as 2D float blocks.

    Parsing goes through ``pandas.read_csv`` in chunks of ``block_size`` rows, so decimal points
    and scientific notation are accepted and blank lines are skipped. Every block has the same
    number of columns as the first data row.

    Args:
        path: File to read.
        delimiter: Column separator.
        header: Skip the first line when True.
        block_size: Maximum rows per yielded block.

    Yields:
        np.ndarray: Array of shape (rows, columns).

    Raises:
        InvalidDataError: On a malformed row, with ``line`` set to the 1-based line number.
    """
    try:
        reader = pd.read_csv(
            path,
            sep=delimiter,
            header=None,
            skiprows=1 if header else 0,
            chunksize=block_size,
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError:
        return
    rows_seen = 0
    width: Optional[int] = None
    with reader:
        while True:
            try:
                chunk = next(reader)
            except StopIteration:
                break
            except pd.errors.EmptyDataError:
                break
            except pd.errors.ParserError as e:
                match = re.search(r"line (\d+)", str(e))
                line = int(match.group(1)) if match else None
                raise InvalidDataError(f"malformed row at line {line}: {e}", line=line) from e
            if width is None:
                width = chunk.shape[1]
            elif chunk.shape[1] != width:
                line = _data_line(path, rows_seen, header)
                raise InvalidDataError(f"line {line} has {chunk.shape[1]} columns, expected {width}", line=line)
            block = chunk.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
            bad = ~np.isfinite(block).all(axis=1)
            if bad.any():
                line = _data_line(path, rows_seen + int(np.argmax(bad)), header)
                raise InvalidDataError(f"missing, non-numeric or non-finite value at line {line}", line=line)
            rows_seen += len(block)
            yield block


def read_csv(path: Union[str, Path], delimiter: str = ",", header: bool = False) -> np.ndarray:
    """Read a whole numeric CSV file into memory.

    Raises:
        InvalidDataError: If the file holds no data rows, or on any malformed row.
    """
    blocks = list(iter_csv_blocks(path, delimiter=delimiter, header=header))
    if not blocks:
        raise InvalidDataError(f"no data rows in {path}")
    data = np.concatenate(blocks, axis=0)
    logger.debug(f"read {data.shape[0]} rows x {data.shape[1]} columns from {path}")
    return data
