"""Tests for the report schema module."""

import json
import math

import numpy as np
import pytest

from rpositive.exceptions import (
    ModelValidationError,
    NoTailUndetermined,
    NotPositiveRecurrent,
    NumericError,
    UndeterminedError,
    WindowTooLarge,
)
from rpositive.report_schema import (
    ErrorCode,
    ErrorReport,
    ExitCode,
    Report,
    ReportMetadata,
    ReportVersion,
    build_error_report,
    build_report,
    classify_exception,
    dumps,
    format_csv,
    side_file,
    to_jsonable,
    validate_report,
    write_json_atomic,
    write_text_atomic,
)


class TestToJsonable:
    """Test conversion to plain JSON values."""

    def test_non_finite_floats(self):
        """Test that inf and nan become null."""
        assert to_jsonable([math.inf, -math.inf, math.nan, 1.5]) == [None, None, None, 1.5]

    def test_numpy_values(self):
        """Test that numpy scalars and arrays are unwrapped."""
        data = to_jsonable({'x': np.float64(0.5), 'n': np.int64(3), 'v': np.array([1.0, np.inf]),
                            'flag': np.bool_(True)})
        assert data == {'x': 0.5, 'n': 3, 'v': [1.0, None], 'flag': True}
        assert type(data['n']) is int
        assert type(data['flag']) is bool

    def test_tuples_and_enums(self):
        """Test that tuples become lists and enums their values."""
        assert to_jsonable((ErrorCode.UNDETERMINED, (1, 2))) == ["UNDETERMINED", [1, 2]]

    def test_keys_become_strings(self):
        """Test that non-string keys are stringified."""
        assert to_jsonable({1: 'a'}) == {'1': 'a'}


class TestDumps:
    """Test canonical JSON text."""

    def test_sorted_with_newline(self):
        """Test key order and trailing newline."""
        text = dumps({'b': 1, 'a': math.inf})
        assert text.endswith("}\n")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {'a': None, 'b': 1}

    def test_stable(self):
        """Test that equal data gives equal text."""
        first = dumps({'x': [0.1, 0.2], 'y': {'z': 1}})
        second = dumps({'y': {'z': 1}, 'x': [0.1, 0.2]})
        assert first == second


class TestBuildReport:
    """Test success reports."""

    def test_fields(self):
        """Test that the payload and metadata are carried."""
        report = build_report("analyze", {"verdict": "RPositive", "r": 2.0}, "1.0.0", "abc")
        assert isinstance(report, Report)
        assert report.success is True
        assert report.metadata.command == "analyze"
        assert report.metadata.report_version == ReportVersion.V1_0.value

    def test_to_dict_validates(self):
        """Test that a built report passes validation."""
        report = build_report("radius", {"s_star": 0.4375}, "1.0.0", "abc")
        data = report.to_dict()
        assert set(data) == {'success', 'command', 'payload', 'metadata'}
        assert validate_report(data) == (True, None)

    def test_to_json_round_trip(self):
        """Test that the JSON text parses back to the same dictionary."""
        report = build_report("chain", {"pmf": np.array([0.5, 0.25])}, "1.0.0", "abc")
        assert json.loads(report.to_json()) == report.to_dict()


class TestBuildErrorReport:
    """Test error reports."""

    @pytest.mark.parametrize("exc,code,exit_code", [
        (ModelValidationError("m.json", "bad"), ErrorCode.VALIDATION_ERROR, ExitCode.VALIDATION),
        (ValueError("bad argument"), ErrorCode.VALIDATION_ERROR, ExitCode.VALIDATION),
        (UndeterminedError("no tail"), ErrorCode.UNDETERMINED, ExitCode.UNDETERMINED),
        (NumericError("overflow"), ErrorCode.NUMERIC_FAILURE, ExitCode.NUMERIC),
        (RuntimeError("boom"), ErrorCode.INTERNAL_ERROR, ExitCode.NUMERIC),
    ])
    def test_classify(self, exc, code, exit_code):
        """Test the exception to code mapping."""
        assert classify_exception(exc) == (code, exit_code)

    def test_subclasses_classified(self):
        """Test that subclasses inherit their family's code."""
        assert classify_exception(NotPositiveRecurrent("ratio 1.002")) == (
            ErrorCode.NUMERIC_FAILURE, ExitCode.NUMERIC)
        assert classify_exception(NoTailUndetermined(1000)) == (
            ErrorCode.UNDETERMINED, ExitCode.UNDETERMINED)
        assert classify_exception(WindowTooLarge(30, 24))[1] == ExitCode.VALIDATION

    def test_fields(self):
        """Test the error report content."""
        report = build_error_report(ModelValidationError("m.json", "bad"), "analyze", "1.0.0", "abc")
        assert isinstance(report, ErrorReport)
        data = report.to_dict()
        assert data['success'] is False
        assert data['error'] == "ModelValidationError"
        assert data['exit_code'] == 3
        assert "m.json" in data['message']
        assert validate_report(data) == (True, None)

    def test_without_metadata(self):
        """Test that metadata is optional in the dictionary form."""
        report = ErrorReport(error="X", error_code="INTERNAL_ERROR", message="m", exit_code=4)
        assert 'metadata' not in report.to_dict()


class TestValidateReport:
    """Test report validation."""

    def test_not_a_dict(self):
        ok, message = validate_report([])
        assert not ok
        assert "dictionary" in message

    def test_missing_payload(self):
        """Test a success report without payload."""
        ok, message = validate_report({'success': True, 'command': 'analyze', 'metadata': {}})
        assert not ok
        assert "payload" in message

    def test_bad_error_code(self):
        """Test an unknown error code."""
        ok, message = validate_report({
            'success': False, 'error': 'X', 'error_code': 'NOPE', 'message': 'm', 'exit_code': 4,
        })
        assert not ok
        assert "NOPE" in message

    def test_version_mismatch(self):
        """Test a report written by another schema version."""
        metadata = ReportMetadata(tool_version="1.0.0", config_hash="abc", command="analyze",
                                  report_version="0.9").to_dict()
        ok, message = validate_report({'success': True, 'command': 'analyze', 'payload': {},
                                       'metadata': metadata})
        assert not ok
        assert "version" in message


class TestFiles:
    """Test CSV formatting and atomic writes."""

    def test_format_csv(self):
        """Test header, repr floats and line endings."""
        text = format_csv(["k", "p"], [(1, 0.1), (2, np.float64(1 / 3))])
        assert text == f"k,p\n1,0.1\n2,{1 / 3!r}\n"

    def test_write_text_atomic(self, tmp_path):
        """Test that the target is written and no temporary file is left."""
        target = tmp_path / "nested" / "out.txt"
        write_text_atomic(target, "hello\n")
        assert target.read_text(encoding='utf-8') == "hello\n"
        assert [p.name for p in target.parent.iterdir()] == ["out.txt"]

    def test_write_json_atomic(self, tmp_path):
        """Test writing a report object and a plain dictionary."""
        report = build_report("verify", {"passed": True}, "1.0.0", "abc")
        path = write_json_atomic(tmp_path / "report.json", report)
        assert path.read_text(encoding='utf-8') == report.to_json()
        path = write_json_atomic(tmp_path / "plain.json", {'b': 1, 'a': 2})
        assert path.read_text(encoding='utf-8') == dumps({'a': 2, 'b': 1})

    def test_side_file(self, tmp_path):
        """Test side file naming."""
        assert side_file(tmp_path / "report.json", "pmf") == tmp_path / "report_pmf.csv"
        assert side_file(tmp_path / "report.json", "simulation", ".json") == tmp_path / "report_simulation.json"
