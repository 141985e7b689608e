"""Ground-truth execution of candidates against testbenches.

Three backends share one result contract:

* ``MiniBackend`` — the hermetic combinational interpreter; the testbench is
  a stimulus-table JSON document.
* ``ExternalBackend`` — adapter around a real simulator invoked via a
  command template with ``{design}`` and ``{testbench}`` placeholders.
* ``MockBackend`` — scripted outcomes for tests.

Infrastructure failures are a distinct status so they are never mistaken for
a failing candidate.
"""
from __future__ import annotations

import hashlib
import logging
import os
import re
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .combinational import StimulusTable, run_stimulus
from .domain import Candidate
from .errors import (
    CombinationalCycleError,
    InvalidSourceError,
    StimulusError,
    UnsupportedConstructError,
)
from .syntax import check_syntax

log = logging.getLogger(__name__)

STATUS_PASS = "pass"
STATUS_FAIL = "fail"
STATUS_COMPILE_ERROR = "compile_error"
STATUS_TIMEOUT = "timeout"
STATUS_INFRA_ERROR = "infra_error"
STATUSES = (
    STATUS_PASS, STATUS_FAIL, STATUS_COMPILE_ERROR, STATUS_TIMEOUT, STATUS_INFRA_ERROR,
)

EXCERPT_LIMIT = 4096
DEFAULT_TIMEOUT = 10.0
DEFAULT_FAILURE_PATTERN = r"(?i)\b(error|fail)"


@dataclass(frozen=True)
class ExecutionResult:
    status: str
    stdout_excerpt: str = ""
    wall_time: float = 0.0

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")


def _clamp(text: str) -> str:
    return text if len(text) <= EXCERPT_LIMIT else text[:EXCERPT_LIMIT]


class MiniBackend:
    """Pure-function execution of combinational candidates against stimuli."""

    name = "mini"

    def run(self, source: str, testbench: str) -> ExecutionResult:
        report = check_syntax(source)
        if not report.ok:
            detail = "; ".join(
                f"{d.line}:{d.column}: {d.message}"
                for d in report.diagnostics
                if d.severity == "error"
            )
            return ExecutionResult(STATUS_COMPILE_ERROR, _clamp(detail))
        try:
            stimuli = StimulusTable.from_json(testbench)
        except StimulusError as exc:
            return ExecutionResult(STATUS_INFRA_ERROR, _clamp(str(exc)))
        try:
            ok, detail = run_stimulus(source, stimuli)
        except (UnsupportedConstructError, CombinationalCycleError, InvalidSourceError) as exc:
            return ExecutionResult(STATUS_COMPILE_ERROR, _clamp(str(exc)))
        except StimulusError as exc:
            return ExecutionResult(STATUS_INFRA_ERROR, _clamp(str(exc)))
        return ExecutionResult(STATUS_PASS if ok else STATUS_FAIL, _clamp(detail))


class MockBackend:
    """Scripted backend: outcomes keyed by source digest or via a callable."""

    name = "mock"

    def __init__(self, script=None, default: str = STATUS_FAIL):
        self.script = script or {}
        self.default = default
        self.calls = 0

    def run(self, source: str, testbench: str) -> ExecutionResult:
        self.calls += 1
        outcome = None
        if callable(self.script):
            outcome = self.script(source, testbench)
        else:
            outcome = self.script.get(source_digest(source))
        if outcome is None:
            outcome = self.default
        if isinstance(outcome, ExecutionResult):
            return outcome
        return ExecutionResult(outcome)


@dataclass(frozen=True)
class RawOutcome:
    exit_code: int | None
    stdout: str
    stderr: str
    timed_out: bool
    spawn_error: str | None = None


def run_external(
    command_template: str,
    design: str,
    testbench: str,
    timeout: float = DEFAULT_TIMEOUT,
    workdir=None,
) -> RawOutcome:
    """Spawn the templated command in an isolated directory and collect output.

    The whole process group is killed on timeout so simulator children do
    not linger.
    """
    if "{design}" not in command_template or "{testbench}" not in command_template:
        raise ValueError("command template needs {design} and {testbench} placeholders")
    with tempfile.TemporaryDirectory(prefix="verirank-exec-", dir=workdir) as tmp:
        design_path = Path(tmp) / "design.v"
        tb_path = Path(tmp) / "tb.v"
        design_path.write_text(design, encoding="utf-8")
        tb_path.write_text(testbench, encoding="utf-8")
        command = command_template.format(design=str(design_path), testbench=str(tb_path))
        try:
            proc = subprocess.Popen(
                command,
                shell=True,
                cwd=tmp,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                start_new_session=True,
            )
        except OSError as exc:
            return RawOutcome(None, "", "", False, spawn_error=str(exc))
        try:
            stdout, stderr = proc.communicate(timeout=timeout)
            return RawOutcome(proc.returncode, stdout, stderr, False)
        except subprocess.TimeoutExpired:
            try:
                os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                proc.kill()
            stdout, stderr = proc.communicate()
            return RawOutcome(None, stdout or "", stderr or "", True)


class ExternalBackend:
    """Adapter for event-driven simulators driven through a shell template."""

    name = "external"

    def __init__(
        self,
        command_template: str,
        timeout: float = DEFAULT_TIMEOUT,
        failure_pattern: str = DEFAULT_FAILURE_PATTERN,
        compile_pattern: str = r"(?i)syntax error|compile",
        workdir=None,
    ):
        self.command_template = command_template
        self.timeout = timeout
        self.failure_re = re.compile(failure_pattern)
        self.compile_re = re.compile(compile_pattern)
        self.workdir = workdir

    def run(self, source: str, testbench: str) -> ExecutionResult:
        raw = run_external(
            self.command_template, source, testbench, self.timeout, self.workdir
        )
        combined = (raw.stdout or "") + ("\n" + raw.stderr if raw.stderr else "")
        if raw.spawn_error is not None:
            return ExecutionResult(STATUS_INFRA_ERROR, _clamp(raw.spawn_error))
        if raw.timed_out:
            return ExecutionResult(STATUS_TIMEOUT, _clamp(combined))
        if raw.exit_code in (126, 127):  # shell could not run the tool
            return ExecutionResult(STATUS_INFRA_ERROR, _clamp(combined))
        if raw.exit_code == 0 and not self.failure_re.search(combined):
            return ExecutionResult(STATUS_PASS, _clamp(combined))
        if self.compile_re.search(combined):
            return ExecutionResult(STATUS_COMPILE_ERROR, _clamp(combined))
        return ExecutionResult(STATUS_FAIL, _clamp(combined))


Backend = MiniBackend | ExternalBackend | MockBackend


def execute(candidate, testbench: str, backend) -> ExecutionResult:
    """Run one candidate against one testbench on the chosen backend."""
    source = candidate.source if isinstance(candidate, Candidate) else candidate
    start = time.perf_counter()
    result = backend.run(source, testbench)
    wall = time.perf_counter() - start
    return ExecutionResult(result.status, _clamp(result.stdout_excerpt), wall)


def source_digest(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def make_backend(kind: str, options: dict | None = None):
    options = options or {}
    if kind == "mini":
        return MiniBackend()
    if kind == "mock":
        return MockBackend(**options)
    if kind == "external":
        return ExternalBackend(**options)
    raise ValueError(f"unknown backend {kind!r}")


ExecuteFn = Callable[[str, str], ExecutionResult]
