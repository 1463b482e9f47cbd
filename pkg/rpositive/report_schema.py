"""Report schema for command-line runs.

Every run produces one JSON report: a success report carrying the command's
payload, or an error report carrying the error code and exit code. Both
embed the tool version and the config hash. JSON output is byte-stable:
keys are sorted and non-finite floats become null.
"""

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import NumericError, UndeterminedError, ValidationError

logger = logging.getLogger(__name__)


class ReportVersion(str, Enum):
    """Report schema version."""
    V1_0 = "1.0"


class ErrorCode(str, Enum):
    """Standard error codes for error reports."""
    VALIDATION_ERROR = "VALIDATION_ERROR"
    UNDETERMINED = "UNDETERMINED"
    NUMERIC_FAILURE = "NUMERIC_FAILURE"
    INTERNAL_ERROR = "INTERNAL_ERROR"


class ExitCode(IntEnum):
    SUCCESS = 0
    UNDETERMINED = 2
    VALIDATION = 3
    NUMERIC = 4


@dataclass
class ReportMetadata:
    """Report metadata."""
    tool_version: str
    config_hash: str
    command: str
    report_version: str = ReportVersion.V1_0.value

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)


def to_jsonable(value: Any) -> Any:
    """Plain JSON values: numpy scalars and arrays unwrapped, tuples as lists, inf/nan as None."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return to_jsonable(value.value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps(data: Any, indent: Optional[int] = 2) -> str:
    """Canonical JSON text with sorted keys and a trailing newline."""
    return json.dumps(to_jsonable(data), indent=indent, sort_keys=True, allow_nan=False) + "\n"


@dataclass
class Report:
    """Successful run."""
    command: str
    payload: dict
    metadata: ReportMetadata
    success: bool = True

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            'success': self.success,
            'command': self.command,
            'payload': to_jsonable(self.payload),
            'metadata': self.metadata.to_dict(),
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        """Convert to JSON string."""
        return dumps(self.to_dict(), indent)


@dataclass
class ErrorReport:
    """Failed run."""
    error: str
    error_code: str
    message: str
    exit_code: int
    metadata: Optional[ReportMetadata] = None
    success: bool = False

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        result = {
            'success': self.success,
            'error': self.error,
            'error_code': self.error_code,
            'message': self.message,
            'exit_code': self.exit_code,
        }
        if self.metadata:
            result['metadata'] = self.metadata.to_dict()
        return result

    def to_json(self, indent: Optional[int] = 2) -> str:
        """Convert to JSON string."""
        return dumps(self.to_dict(), indent)


def classify_exception(exc: BaseException) -> Tuple[ErrorCode, ExitCode]:
    """Error code and exit code for an exception.

    Bad arguments (ValueError) count as validation errors.
    """
    if isinstance(exc, (ValidationError, ValueError)):
        return ErrorCode.VALIDATION_ERROR, ExitCode.VALIDATION
    if isinstance(exc, UndeterminedError):
        return ErrorCode.UNDETERMINED, ExitCode.UNDETERMINED
    if isinstance(exc, NumericError):
        return ErrorCode.NUMERIC_FAILURE, ExitCode.NUMERIC
    return ErrorCode.INTERNAL_ERROR, ExitCode.NUMERIC


def build_report(command: str, payload: dict, tool_version: str, config_hash: str) -> Report:
    """Build a success report.

    Example:
        >>> report = build_report("analyze", {"verdict": "RPositive"}, "1.0.0", "abc")
        >>> report.success
        True
    """
    metadata = ReportMetadata(tool_version=tool_version, config_hash=config_hash, command=command)
    logger.debug(f"Built {command} report with {len(payload)} payload keys")
    return Report(command=command, payload=payload, metadata=metadata)


def build_error_report(exc: BaseException, command: str, tool_version: str,
                       config_hash: str = "") -> ErrorReport:
    """Build an error report from an exception."""
    error_code, exit_code = classify_exception(exc)
    metadata = ReportMetadata(tool_version=tool_version, config_hash=config_hash, command=command)
    return ErrorReport(
        error=type(exc).__name__,
        error_code=error_code.value,
        message=str(exc),
        exit_code=int(exit_code),
        metadata=metadata,
    )


def validate_report(report: dict, schema_version: str = ReportVersion.V1_0.value) -> Tuple[bool, Optional[str]]:
    """Validate report structure.

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(report, dict):
        return False, "Report must be a dictionary"
    if report.get('success', False):
        for field in ('command', 'payload', 'metadata'):
            if field not in report:
                return False, f"Missing required field: {field}"
        if not isinstance(report['payload'], dict):
            return False, "Payload must be a dictionary"
    else:
        for field in ('error', 'error_code', 'message', 'exit_code'):
            if field not in report:
                return False, f"Missing required error field: {field}"
        if report['error_code'] not in {code.value for code in ErrorCode}:
            logger.warning(f"Invalid error code: {report['error_code']}")
            return False, f"Invalid error code: {report['error_code']}"
    metadata = report.get('metadata')
    if metadata:
        for field in ('tool_version', 'config_hash'):
            if field not in metadata:
                return False, f"Missing required metadata field: {field}"
        if metadata.get('report_version') != schema_version:
            return False, f"Schema version mismatch: expected {schema_version}"
    return True, None


def format_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV text with '\\n' line endings; floats written with repr."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buffer.getvalue()


def write_text_atomic(path: Union[str, Path], text: str) -> Path:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path('.')
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp_name, path)
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug(f"Wrote {len(text)} characters to {path}")
    return path


def write_json_atomic(path: Union[str, Path], report: Union[Report, ErrorReport, dict]) -> Path:
    text = report.to_json() if isinstance(report, (Report, ErrorReport)) else dumps(report)
    return write_text_atomic(path, text)


def side_file(path: Union[str, Path], suffix: str, extension: str = ".csv") -> Path:
    """report.json -> report_<suffix>.csv (or another extension) next to it."""
    path = Path(path)
    return path.with_name(f"{path.stem}_{suffix}{extension}")
