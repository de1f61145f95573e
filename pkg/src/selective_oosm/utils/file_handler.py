"""
File handling utilities for benchmark reports (CSV tables and JSONL run records).
"""

from pathlib import Path
from typing import Any, Dict, Generator, Iterable, List, Union

import jsonlines
import pandas as pd

from selective_oosm.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

# All floats in report tables carry 9 significant digits
FLOAT_FORMAT = "%.9g"


class ReportHandler:
    """Handler for reading and writing report files."""

    @staticmethod
    def write_csv(frame: pd.DataFrame, filepath: PathLike) -> Path:
        """
        Write a table to CSV with a fixed float format.

        Args:
            frame: Table to write; its column order is kept
            filepath: Output file path

        Returns:
            Path that was written
        """
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)

        try:
            frame.to_csv(
                filepath,
                index=False,
                float_format=FLOAT_FORMAT,
                lineterminator="\n",
            )
            logger.info(f"Wrote {len(frame)} rows to {filepath}")
        except Exception as e:
            logger.error(f"Failed to write to {filepath}: {e}")
            raise

        return filepath

    @staticmethod
    def read_csv(filepath: PathLike) -> pd.DataFrame:
        """
        Read a report table.

        Args:
            filepath: Input file path

        Returns:
            Table contents (empty frame if the file does not exist)
        """
        filepath = Path(filepath)

        if not filepath.exists():
            logger.warning(f"File not found: {filepath}")
            return pd.DataFrame()

        try:
            frame = pd.read_csv(filepath)
            logger.info(f"Read {len(frame)} rows from {filepath}")
            return frame
        except Exception as e:
            logger.error(f"Failed to read from {filepath}: {e}")
            raise

    @staticmethod
    def write_jsonl(records: Iterable[Dict[str, Any]], filepath: PathLike, append: bool = False) -> int:
        """
        Write run records to a JSONL file.

        Args:
            records: Dictionaries to write, one per line
            filepath: Output file path
            append: If True, append to existing file; if False, overwrite

        Returns:
            Number of records written
        """
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)

        mode = 'a' if append else 'w'
        count = 0

        try:
            with jsonlines.open(filepath, mode=mode) as writer:
                for item in records:
                    writer.write(item)
                    count += 1

            logger.info(f"Wrote {count} records to {filepath}")
        except Exception as e:
            logger.error(f"Failed to write to {filepath}: {e}")
            raise

        return count

    @staticmethod
    def read_jsonl(filepath: PathLike) -> List[Dict[str, Any]]:
        """
        Read all records from a JSONL file.

        Args:
            filepath: Input file path

        Returns:
            List of dictionaries
        """
        return list(ReportHandler.iter_jsonl(filepath))

    @staticmethod
    def iter_jsonl(filepath: PathLike) -> Generator[Dict[str, Any], None, None]:
        """
        Read records from a JSONL file one at a time.

        Args:
            filepath: Input file path

        Yields:
            Dictionary records one at a time
        """
        filepath = Path(filepath)

        if not filepath.exists():
            logger.warning(f"File not found: {filepath}")
            return

        try:
            with jsonlines.open(filepath) as reader:
                for item in reader:
                    yield item
        except Exception as e:
            logger.error(f"Failed to read from {filepath}: {e}")
            raise
