"""Predictor abstraction: in-process rule oracle and out-of-process client.

Every predictor answers batched label queries over the run's flat feature
matrix and exposes its finite outcome set. The out-of-process transport is
newline-delimited JSON over the child's stdin/stdout:

    child -> engine on start: {"type":"hello","columns":[...],"labels":[...]}
    engine -> child:          {"type":"predict","id":<int>,"rows":[[...],...]}
    child -> engine:          {"type":"prediction","id":<int>,"labels":[...]}
    engine -> child on exit:  {"type":"shutdown"}

One request is in flight at a time; ids increase strictly.
"""

import json
import logging
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from procf.encoding import FeatureMatrix
from procf.errors import PredictorError, ProtocolError, SchemaError

log = logging.getLogger(__name__)

_OPS = ("<=", ">", "==", "!=")


@dataclass(frozen=True)
class OracleRule:
    conditions: tuple      # ((display_column, op, value), ...)
    label: str


class RuleOracle:
    """Transparent first-match rule list over feature-matrix columns.

    Conditions reference matrix values: scaled numerics, raw counts,
    0/1 one-hot columns.
    """

    def __init__(self, rules, default_label: str, labels=None):
        self.rules = tuple(
            r if isinstance(r, OracleRule) else OracleRule(tuple(map(tuple, r[0])), r[1])
            for r in rules
        )
        for rule in self.rules:
            for _, op, _ in rule.conditions:
                if op not in _OPS:
                    raise SchemaError(f"oracle rule op {op!r} not one of {_OPS}")
        self.default_label = default_label
        if labels is None:
            labels = []
            for rule in self.rules:
                if rule.label not in labels:
                    labels.append(rule.label)
            if default_label not in labels:
                labels.append(default_label)
        self.outcome_set = tuple(labels)

    @classmethod
    def from_json(cls, source) -> "RuleOracle":
        if isinstance(source, (str, Path)):
            with open(source, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        else:
            doc = source
        rules = [OracleRule(tuple(tuple(c) for c in r["if"]), r["then"]) for r in doc["rules"]]
        return cls(rules, doc["default"], labels=doc.get("labels"))

    def predict_batch(self, matrix: FeatureMatrix):
        index = {name: i for i, name in enumerate(matrix.display_names)}
        data = matrix.data
        labels = np.full(matrix.n_rows, self.default_label, dtype=object)
        # assign in reverse so the first matching rule wins
        for rule in reversed(self.rules):
            mask = np.ones(matrix.n_rows, dtype=bool)
            for column, op, value in rule.conditions:
                if column not in index:
                    raise SchemaError(f"oracle condition on unknown column {column!r}")
                col = data[:, index[column]]
                if op == "<=":
                    mask &= col <= value
                elif op == ">":
                    mask &= col > value
                elif op == "==":
                    mask &= col == value
                else:
                    mask &= col != value
            labels[mask] = rule.label
        return list(labels)


class ExternalPredictor:
    """Client for a predictor child process speaking the wire protocol."""

    def __init__(self, cmd, columns, timeout: float = 30.0):
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.cmd = list(cmd)
        self.timeout = timeout
        self._next_id = 0
        self._closed = False
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise PredictorError(f"failed to launch predictor {self.cmd}: {exc}")

        self._lines = queue.Queue()
        self._stderr_chunks = []
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()

        hello = self._read_message()
        if hello.get("type") != "hello":
            raise ProtocolError(f"expected hello, got {hello!r}" + self._stderr_suffix())
        got_columns = hello.get("columns")
        if list(got_columns or []) != list(columns):
            raise ProtocolError(
                f"predictor column mismatch: engine has {len(columns)} columns "
                f"{list(columns)}, predictor announced {got_columns}"
            )
        labels = hello.get("labels") or []
        if not labels:
            raise ProtocolError("hello carried no labels" + self._stderr_suffix())
        self.outcome_set = tuple(str(label) for label in labels)

    # -- transport ---------------------------------------------------------

    def _pump_stdout(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _pump_stderr(self):
        for line in self._proc.stderr:
            self._stderr_chunks.append(line)

    def _stderr_suffix(self) -> str:
        text = "".join(self._stderr_chunks).strip()
        return f" (predictor stderr: {text})" if text else ""

    def _read_message(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._kill()
            raise ProtocolError(f"predictor answered nothing within {self.timeout}s"
                                + self._stderr_suffix())
        if line is None:
            raise ProtocolError("predictor exited before answering" + self._stderr_suffix())
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"bad JSON from predictor: {line!r}" + self._stderr_suffix())

    def _send(self, message: dict):
        try:
            self._proc.stdin.write(json.dumps(message) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise PredictorError("predictor process is gone" + self._stderr_suffix())

    # -- API ----------------------------------------------------------------

    def predict_batch(self, matrix: FeatureMatrix):
        if self._closed:
            raise PredictorError("predictor session already closed")
        request_id = self._next_id
        self._next_id += 1
        self._send({
            "type": "predict",
            "id": request_id,
            "rows": [[float(v) for v in row] for row in matrix.data],
        })
        reply = self._read_message()
        if reply.get("type") != "prediction" or reply.get("id") != request_id:
            raise ProtocolError(f"expected prediction id={request_id}, got {reply!r}")
        labels = [str(label) for label in reply.get("labels", [])]
        if len(labels) != matrix.n_rows:
            raise ProtocolError(
                f"predictor returned {len(labels)} labels for {matrix.n_rows} rows"
            )
        unknown = set(labels) - set(self.outcome_set)
        if unknown:
            raise ProtocolError(f"labels outside the announced outcome set: {sorted(unknown)}")
        return labels

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            self._send({"type": "shutdown"})
        except PredictorError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._kill()

    def _kill(self):
        try:
            self._proc.kill()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def spawn_external(cmd, columns, timeout: float = 30.0) -> ExternalPredictor:
    """Launch a wire-protocol predictor and complete its handshake."""
    return ExternalPredictor(cmd, columns, timeout=timeout)
