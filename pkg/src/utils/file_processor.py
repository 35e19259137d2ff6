"""
File processing utilities: sample ingestion and atomic result writers
"""
import os
import json
import logging
import tempfile
from typing import Any, Iterable, List, Optional, Tuple
from pathlib import Path

import numpy as np
import pandas as pd

from ..models.errors import SampleFormatError
from ..models.sample_data import RESCALE_EPSILON, RescaleRecord, Sample

logger = logging.getLogger(__name__)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except (TypeError, ValueError):
        return False


class FileProcessor:
    """Reads point clouds from CSV and writes result files atomically"""

    def __init__(self, max_file_size: int = 512 * 1024 * 1024):
        self.max_file_size = max_file_size
        self.allowed_extensions = [".csv", ".txt", ".dat"]

    def validate_file(self, file_path: str) -> Tuple[bool, str]:
        """Validate file for processing"""
        try:
            if not os.path.exists(file_path):
                return False, "File does not exist"

            file_size = os.path.getsize(file_path)
            if file_size > self.max_file_size:
                return False, f"File size ({file_size} bytes) exceeds maximum allowed size ({self.max_file_size} bytes)"

            file_extension = Path(file_path).suffix.lower()
            if file_extension and file_extension not in self.allowed_extensions:
                return False, f"File extension '{file_extension}' is not supported. Allowed: {', '.join(self.allowed_extensions)}"

            if not os.access(file_path, os.R_OK):
                return False, "File is not readable"

            return True, "File is valid"

        except Exception as e:
            logger.error(f"Error validating file {file_path}: {str(e)}")
            return False, f"Error validating file: {str(e)}"

    def read_points(self, file_path: str) -> np.ndarray:
        """Parse one point per row; a non-numeric first row is taken as a header"""
        valid, message = self.validate_file(file_path)
        if not valid:
            raise SampleFormatError(f"{file_path}: {message}")
        try:
            frame = pd.read_csv(file_path, header=None, dtype=str, skip_blank_lines=False,
                                keep_default_na=False, skipinitialspace=True)
        except pd.errors.EmptyDataError:
            logger.info(f"{file_path} is empty; returning an empty sample")
            return np.empty((0, 0))
        except pd.errors.ParserError as e:
            raise SampleFormatError(f"{file_path}: ragged rows ({str(e).strip()})")

        frame = frame.fillna("")
        # line numbers are 1-based positions in the file
        frame.index = np.arange(1, len(frame) + 1)
        frame = frame[~(frame.apply(lambda col: col.str.strip()) == "").all(axis=1)]
        if frame.empty:
            return np.empty((0, 0))

        first = frame.iloc[0]
        if not all(_is_number(v) for v in first if v.strip()):
            logger.debug(f"{file_path}: treating line {frame.index[0]} as a header")
            frame = frame.iloc[1:]
            if frame.empty:
                return np.empty((0, frame.shape[1]))

        ragged = (frame.apply(lambda col: col.str.strip()) == "").any(axis=1)
        if ragged.any():
            raise SampleFormatError(f"{file_path}: line {ragged.idxmax()} has a missing field")

        values = frame.apply(pd.to_numeric, errors="coerce")
        bad = values.isna().any(axis=1)
        if bad.any():
            line = bad.idxmax()
            raise SampleFormatError(f"{file_path}: line {line} has a non-numeric field: {','.join(frame.loc[line])}")
        return values.to_numpy(dtype=float)

    @staticmethod
    def fit_rescale(*arrays: np.ndarray, epsilon: float = RESCALE_EPSILON) -> RescaleRecord:
        """Per-axis [min, max] of all non-empty arrays pooled together"""
        pooled = np.vstack([a for a in arrays if a.size])
        return RescaleRecord(tuple(pooled.min(axis=0).tolist()), tuple(pooled.max(axis=0).tolist()), epsilon)

    def _to_sample(self, points: np.ndarray, label: str, source: str,
                   rescale: Optional[RescaleRecord]) -> Sample:
        if rescale is not None and points.size:
            return Sample(rescale.apply(points), label=label, rescale=rescale, source=source)
        if points.size:
            outside = np.any((points < 0.0) | (points > 1.0), axis=1)
            if outside.any():
                row = int(np.argmax(outside))
                raise SampleFormatError(
                    f"{source}: data row {row + 1} has values outside [0, 1]: {points[row].tolist()}; use --rescale"
                )
        return Sample(points, label=label, source=source)

    def load_sample(self, file_path: str, rescale: bool = False, label: str = "X") -> Sample:
        """Read one sample, optionally mapped onto [eps, 1 - eps] by its own range"""
        try:
            points = self.read_points(file_path)
            record = self.fit_rescale(points) if rescale and points.size else None
            sample = self._to_sample(points, label, file_path, record)
            logger.info(f"Loaded sample {label} from {file_path}: n={sample.size}, d={sample.dimension}")
            return sample
        except Exception as e:
            logger.error(f"Error loading sample from {file_path}: {str(e)}")
            raise

    def load_pair(self, x_path: str, y_path: str, rescale: bool = False) -> Tuple[Sample, Sample]:
        """Read X and Y; rescaling uses their pooled range so both share one map"""
        x_points = self.read_points(x_path)
        y_points = self.read_points(y_path)
        if x_points.size and y_points.size and x_points.shape[1] != y_points.shape[1]:
            raise SampleFormatError(f"{x_path} has {x_points.shape[1]} columns, {y_path} has {y_points.shape[1]}")
        record = self.fit_rescale(x_points, y_points) if rescale and (x_points.size or y_points.size) else None
        x = self._to_sample(x_points, "X", x_path, record)
        y = self._to_sample(y_points, "Y", y_path, record)
        logger.info(f"Loaded samples: n1={x.size}, n2={y.size}, d={max(x.dimension, y.dimension)}")
        return x, y

    def ensure_directory_exists(self, directory_path: str) -> bool:
        """Ensure directory exists, create if it doesn't"""
        try:
            os.makedirs(directory_path, exist_ok=True)
            return True
        except Exception as e:
            logger.error(f"Error creating directory {directory_path}: {str(e)}")
            return False

    def save_text_atomically(self, content: str, file_path: str):
        """Write to a temporary file in the target directory, then rename over the target"""
        directory = os.path.dirname(os.path.abspath(file_path))
        if not self.ensure_directory_exists(directory):
            raise OSError(f"Cannot create directory {directory}")
        fd, temp_path = tempfile.mkstemp(dir=directory, prefix=f".{os.path.basename(file_path)}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(content)
            os.replace(temp_path, file_path)
        except Exception as e:
            logger.error(f"Error saving file {file_path}: {str(e)}")
            if os.path.exists(temp_path):
                os.remove(temp_path)
            raise

    def write_json(self, data: Any, file_path: str):
        self.save_text_atomically(json.dumps(data, indent=2, default=str) + "\n", file_path)

    def write_jsonl(self, records: Iterable[Any], file_path: str):
        self.save_text_atomically("".join(json.dumps(r, default=str) + "\n" for r in records), file_path)

    def write_csv(self, rows: List[dict], file_path: str, columns: List[str]):
        frame = pd.DataFrame(rows, columns=columns)
        self.save_text_atomically(frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"), file_path)
