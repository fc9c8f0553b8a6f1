"""Training and the stdio serving loop."""

import json
import sys

import joblib
import numpy as np
from sklearn.ensemble import RandomForestClassifier

from procf_predictor.features import Encoder, Log, Schema


def train(log_path, schema_path, model_path, seed: int = 0,
          n_estimators: int = 100, prefix_lengths=None) -> dict:
    """Fit a random forest on all prefixes of the log and persist it.

    Returns the manifest (also written next to the model as
    ``<model_path>.manifest.json``).
    """
    schema = Schema.load(schema_path)
    log = Log.load(log_path, schema)
    encoder = Encoder(schema, log)
    X, y = encoder.training_rows(log, prefix_lengths)
    if len(set(y)) < 2:
        raise ValueError("training log has a single outcome class")

    model = RandomForestClassifier(n_estimators=n_estimators, random_state=seed)
    model.fit(X, y)
    labels = [str(label) for label in model.classes_]

    bundle = {"model": model, "columns": encoder.columns, "labels": labels}
    joblib.dump(bundle, model_path)
    manifest = {
        "columns": encoder.columns,
        "labels": labels,
        "seed": seed,
        "n_estimators": n_estimators,
        "n_training_rows": int(X.shape[0]),
        "prefix_lengths": list(prefix_lengths) if prefix_lengths else "all",
    }
    with open(f"{model_path}.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_bundle(model_path) -> dict:
    return joblib.load(model_path)


def predict_rows(bundle: dict, rows) -> list:
    if not rows:
        return []
    X = np.asarray(rows, dtype=np.float64)
    return [str(label) for label in bundle["model"].predict(X)]


def serve(model_path, stdin=None, stdout=None) -> int:
    """Answer the engine's wire protocol until shutdown or EOF."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    bundle = load_bundle(model_path)

    def emit(message: dict):
        stdout.write(json.dumps(message) + "\n")
        stdout.flush()

    emit({"type": "hello", "columns": bundle["columns"], "labels": bundle["labels"]})
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            emit({"type": "error", "id": None, "message": "malformed JSON line"})
            continue
        mtype = message.get("type")
        if mtype == "shutdown":
            return 0
        if mtype != "predict":
            emit({"type": "error", "id": message.get("id"),
                  "message": f"unsupported message type {mtype!r}"})
            continue
        rows = message.get("rows", [])
        if rows and any(len(r) != len(bundle["columns"]) for r in rows):
            emit({"type": "error", "id": message.get("id"),
                  "message": f"rows must have {len(bundle['columns'])} values"})
            continue
        emit({"type": "prediction", "id": message.get("id"),
              "labels": predict_rows(bundle, rows)})
    return 0
