"""Pluggable verification-program executors.

The contract is tiny: the program receives its inputs as ``key=value`` lines
on stdin and must print the answer as the last stdout line. The local
executor runs Python in an isolated subprocess with a wall-clock budget and
an output cap; the HTTP client speaks the same contract to a remote runner.
"""

from __future__ import annotations

import subprocess
import sys
from dataclasses import dataclass

import httpx

from .errors import ExecutionError

OUTPUT_CAP_BYTES = 64 * 1024 * 1024
DEFAULT_TIMEOUT_S = 5.0


@dataclass(frozen=True)
class ExecResult:
    stdout: str
    exit_status: int


def render_inputs(inputs: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in sorted(inputs.items()))


class LocalPythonExecutor:
    """Run a verification program under the local interpreter.

    ``-I`` isolates the child from site-packages and environment hooks; the
    environment is emptied so programs cannot pick up credentials. Network
    isolation is the deployment's responsibility; programs used here are
    short arithmetic checks.
    """

    def run(self, program: str, inputs: dict, timeout_s: float = DEFAULT_TIMEOUT_S) -> ExecResult:
        try:
            proc = subprocess.run(
                [sys.executable, "-I", "-c", program],
                input=render_inputs(inputs),
                capture_output=True,
                text=True,
                timeout=timeout_s,
                env={},
            )
        except subprocess.TimeoutExpired:
            raise ExecutionError(
                f"verification program exceeded {timeout_s}s", kind="timeout"
            ) from None
        if len(proc.stdout) > OUTPUT_CAP_BYTES:
            raise ExecutionError("verification program output exceeds cap", kind="bad_output")
        if proc.returncode != 0:
            raise ExecutionError(
                f"verification program exited {proc.returncode}",
                kind="nonzero_exit",
                detail=proc.stderr[-2000:],
            )
        return ExecResult(stdout=proc.stdout, exit_status=proc.returncode)


class HTTPExecutorClient:
    """Remote executor speaking {program, inputs} -> {stdout, exit_status}."""

    def __init__(self, endpoint: str, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self._client = client or httpx.Client(timeout=30.0)

    def run(self, program: str, inputs: dict, timeout_s: float = DEFAULT_TIMEOUT_S) -> ExecResult:
        try:
            resp = self._client.post(
                self.endpoint,
                json={"program": program, "inputs": inputs, "timeout_s": timeout_s},
            )
            resp.raise_for_status()
            data = resp.json()
        except httpx.HTTPError as exc:
            raise ExecutionError(f"executor endpoint failed: {exc}", kind="bad_output")
        if data.get("error") == "timeout":
            raise ExecutionError("remote execution timed out", kind="timeout")
        exit_status = int(data.get("exit_status", 1))
        if exit_status != 0:
            raise ExecutionError(
                f"remote program exited {exit_status}", kind="nonzero_exit"
            )
        return ExecResult(stdout=str(data.get("stdout", "")), exit_status=exit_status)
