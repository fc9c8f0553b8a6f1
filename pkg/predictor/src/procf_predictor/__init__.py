"""Reference out-of-process predictor for the procf engine.

Trains a random-forest outcome classifier on an event log and serves it
over the engine's newline-delimited JSON stdio protocol. Implemented
strictly against the engine's documented external interfaces (CSV log,
schema sidecar, feature layout, wire protocol); it shares no code with
the engine.
"""

__version__ = "0.1.0"
