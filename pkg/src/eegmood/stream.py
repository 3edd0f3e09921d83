"""Real-time streaming classification service.

Consumes newline-delimited JSON ticks ({"s": [microvolts per channel]}),
maintains tumbling windows, and emits one prediction record per window:
{"window", "valence", "arousal", "quadrant", "dv_val", "dv_aro",
"latency_ms"}. The session opens with a handshake record and interleaves
periodic stats records ({"stats": ...}); malformed input produces error
records on the error stream only and is skipped. Transports: stdin or a
single-client TCP listener.
"""

from __future__ import annotations

import json
import queue
import socket
import sys
import threading
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataError
from .features import (BaselineReference, band_features_of,
                       baseline_reference, load_baseline_reference)
from .signals import Label, Window, validate_channel
from .svm import (AROVAL, VALARO, Quadrant, TrainedSvm, load_model,
                  quadrant_of)
from .wavelet import SYMMETRIC

PROTOCOL_NAME = "eegmood-stream"
PROTOCOL_VERSION = 1
RATE_HZ = 128.0
BASELINE_TICKS = int(3 * RATE_HZ)
STATS_EVERY = 25

BASELINE_FROM_STREAM = "stream"
BASELINE_FROM_FILE = "file"


@dataclass(frozen=True)
class StreamConfig:
    channels: tuple[str, ...]
    tau_s: int
    baseline_mode: str                    # "stream" | "file"
    valence_model: str
    arousal_model: str
    chained: str | None = None            # None | "valaro" | "aroval"
    baseline_path: str | None = None
    transport: str = "stdin"              # "stdin" | "tcp"
    listen: str | None = None             # "host:port" for tcp
    boundary_mode: str = SYMMETRIC

    def __post_init__(self):
        object.__setattr__(self, "channels",
                           tuple(validate_channel(c) for c in self.channels))
        if len(self.channels) not in (5, 32):
            raise ValueError(
                f"stream needs 5 or 32 channels, got {len(self.channels)}")
        if self.tau_s not in (1, 3):
            raise ValueError(f"tau_s must be 1 or 3, got {self.tau_s}")
        if self.baseline_mode not in (BASELINE_FROM_STREAM,
                                      BASELINE_FROM_FILE):
            raise ValueError(f"unknown baseline mode {self.baseline_mode!r}")
        if self.baseline_mode == BASELINE_FROM_FILE and not self.baseline_path:
            raise ValueError("baseline mode 'file' needs baseline_path")
        if self.chained not in (None, VALARO, AROVAL):
            raise ValueError(f"unknown chained direction {self.chained!r}")


def load_stream_config(path) -> StreamConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read stream config {path}: {exc}") from exc
    baseline = doc.get("baseline", {"mode": BASELINE_FROM_STREAM})
    models = doc["models"]
    transport = doc.get("transport", {"kind": "stdin"})
    return StreamConfig(
        channels=tuple(doc["channels"]),
        tau_s=int(doc.get("tau_s", 1)),
        baseline_mode=baseline.get("mode", BASELINE_FROM_STREAM),
        baseline_path=baseline.get("path"),
        valence_model=models["valence"],
        arousal_model=models["arousal"],
        chained=models.get("chained"),
        transport=transport.get("kind", "stdin"),
        listen=transport.get("listen"),
        boundary_mode=doc.get("boundary_mode", SYMMETRIC))


@dataclass
class LoadedModels:
    """Valence/arousal classifiers, optionally wired as a chained pair."""

    valence: TrainedSvm
    arousal: TrainedSvm
    chained: str | None = None

    def validate(self, n_channels: int) -> None:
        base = n_channels * 8
        if self.chained == VALARO:
            first, second = self.arousal, self.valence
        elif self.chained == AROVAL:
            first, second = self.valence, self.arousal
        else:
            first = second = None
        if first is not None:
            if first.n_features != base or second.n_features != base + 1:
                raise DataError(
                    f"chained {self.chained}: expected model dims "
                    f"{base}/{base + 1}, got {first.n_features}/"
                    f"{second.n_features}")
            return
        for name, model in (("valence", self.valence),
                            ("arousal", self.arousal)):
            if model.n_features != base:
                raise DataError(
                    f"{name} model expects {model.n_features} features but "
                    f"{n_channels} channels produce {base}")


def load_models(cfg: StreamConfig) -> LoadedModels:
    try:
        models = LoadedModels(valence=load_model(cfg.valence_model),
                              arousal=load_model(cfg.arousal_model),
                              chained=cfg.chained)
    except OSError as exc:
        raise DataError(f"cannot load model: {exc}") from exc
    models.validate(len(cfg.channels))
    return models


class ClassifiedWindow(NamedTuple):
    valence: Label
    arousal: Label
    quadrant: Quadrant
    dv_valence: float
    dv_arousal: float
    latency_ms: float


class WindowAccumulator:
    """Per-channel ring buffer emitting one window per tau*128 ticks."""

    def __init__(self, n_channels: int, tau_s: int, rate_hz: float = RATE_HZ):
        self.n_channels = n_channels
        self.window_len = round(tau_s * rate_hz)
        self.tau_s = tau_s
        self.buffer = np.empty((n_channels, self.window_len))
        self.fill = 0
        self.accepted = 0
        self.emitted = 0

    def accumulate(self, tick) -> Window | None:
        values = np.asarray(tick, dtype=np.float64)
        if values.shape != (self.n_channels,):
            raise ValueError(
                f"tick {self.accepted}: expected {self.n_channels} values, "
                f"got {values.shape}")
        self.buffer[:, self.fill] = values
        self.fill += 1
        self.accepted += 1
        if self.fill < self.window_len:
            return None
        window = Window(index=self.emitted, samples=self.buffer.copy(),
                        tau_s=self.tau_s)
        self.fill = 0
        self.emitted += 1
        return window


def classify_window(window: Window, models: LoadedModels,
                    ref: BaselineReference,
                    boundary_mode: str = SYMMETRIC) -> ClassifiedWindow:
    """Full pipeline on one window: decompose, remove baseline, predict."""
    start = time.perf_counter()
    feats = band_features_of(window.samples, mode=boundary_mode)
    if feats.shape != ref.values.shape:
        raise ValueError(
            f"window features {feats.shape} do not match baseline reference "
            f"{ref.values.shape}")
    vector = (feats - ref.values).reshape(1, -1)
    if models.chained in (VALARO, AROVAL):
        first = models.arousal if models.chained == VALARO else models.valence
        second = models.valence if models.chained == VALARO else models.arousal
        dv1 = float(first.decision_values(vector)[0])
        lab1 = Label.HIGH if dv1 > 0 else Label.LOW
        cond = np.append(vector[0], 1.0 if lab1 is Label.HIGH else 0.0)
        dv2 = float(second.decision_values(cond.reshape(1, -1))[0])
        lab2 = Label.HIGH if dv2 > 0 else Label.LOW
        if models.chained == VALARO:
            val, aro, dv_val, dv_aro = lab2, lab1, dv2, dv1
        else:
            val, aro, dv_val, dv_aro = lab1, lab2, dv1, dv2
    else:
        dv_val = float(models.valence.decision_values(vector)[0])
        dv_aro = float(models.arousal.decision_values(vector)[0])
        val = Label.HIGH if dv_val > 0 else Label.LOW
        aro = Label.HIGH if dv_aro > 0 else Label.LOW
    latency_ms = (time.perf_counter() - start) * 1000.0
    return ClassifiedWindow(valence=val, arousal=aro,
                            quadrant=quadrant_of(val, aro),
                            dv_valence=dv_val, dv_arousal=dv_aro,
                            latency_ms=latency_ms)


class StreamSession:
    """Transport-independent protocol state machine.

    Feed input lines; get back (records, error_records). Records preserve
    window order; a stats record follows every STATS_EVERY-th prediction.
    """

    def __init__(self, cfg: StreamConfig, models: LoadedModels,
                 queue_depth=lambda: 0):
        self.cfg = cfg
        self.models = models
        self.queue_depth = queue_depth
        self.acc = WindowAccumulator(len(cfg.channels), cfg.tau_s)
        self.line_number = 0
        self.latencies: list[float] = []
        if cfg.baseline_mode == BASELINE_FROM_FILE:
            ref = load_baseline_reference(cfg.baseline_path)
            if ref.values.shape[0] != len(cfg.channels) \
                    or ref.tau_s != cfg.tau_s:
                raise DataError(
                    f"baseline reference {cfg.baseline_path} does not match "
                    f"the stream config (channels/tau)")
            self.ref = ref
            self._baseline_ticks = None
        else:
            self.ref = None
            self._baseline_ticks = []

    def handshake_record(self) -> dict:
        return {"proto": PROTOCOL_NAME, "version": PROTOCOL_VERSION,
                "tau_s": self.cfg.tau_s, "channels": len(self.cfg.channels),
                "baseline_mode": self.cfg.baseline_mode}

    def feed_line(self, line: str):
        """Process one input line; returns (records, error_records)."""
        self.line_number += 1
        line = line.strip()
        if not line:
            return [], []
        try:
            doc = json.loads(line)
            tick = doc["s"]
            if not isinstance(tick, list):
                raise TypeError("field 's' must be an array")
            values = np.asarray(tick, dtype=np.float64)
            if values.shape != (self.acc.n_channels,):
                raise ValueError(
                    f"expected {self.acc.n_channels} values, "
                    f"got {values.shape[0] if values.ndim == 1 else 'nested'}")
        except Exception as exc:  # malformed line: report and skip
            return [], [{"error": str(exc), "line": self.line_number,
                         "position": self.acc.accepted}]
        return self._feed_tick(values), []

    def _feed_tick(self, values) -> list[dict]:
        if self.ref is None:
            self._baseline_ticks.append(values)
            if len(self._baseline_ticks) == BASELINE_TICKS:
                baseline = np.stack(self._baseline_ticks, axis=1)
                self.ref = baseline_reference(
                    baseline, self.cfg.tau_s, RATE_HZ,
                    channels=self.cfg.channels,
                    mode=self.cfg.boundary_mode)
                self._baseline_ticks = None
            return []
        window = self.acc.accumulate(values)
        if window is None:
            return []
        result = classify_window(window, self.models, self.ref,
                                 self.cfg.boundary_mode)
        self.latencies.append(result.latency_ms)
        records = [{
            "window": window.index,
            "valence": result.valence.value,
            "arousal": result.arousal.value,
            "quadrant": result.quadrant.value,
            "dv_val": result.dv_valence,
            "dv_aro": result.dv_arousal,
            "latency_ms": result.latency_ms,
        }]
        if (window.index + 1) % STATS_EVERY == 0:
            records.append({"stats": {"queue_depth": int(self.queue_depth()),
                                      "windows": window.index + 1}})
        return records


def _pump(session: StreamSession, lines, out, err) -> None:
    """Drive a session over line-based file objects."""
    in_queue: queue.Queue = queue.Queue()
    eof = object()

    def reader():
        try:
            for line in lines:
                in_queue.put(line)
        finally:
            in_queue.put(eof)

    thread = threading.Thread(target=reader, daemon=True)
    session.queue_depth = in_queue.qsize
    thread.start()
    out.write(json.dumps(session.handshake_record()) + "\n")
    out.flush()
    while True:
        item = in_queue.get()
        if item is eof:
            break
        records, errors = session.feed_line(item)
        for record in errors:
            err.write(json.dumps(record) + "\n")
            err.flush()
        for record in records:
            out.write(json.dumps(record) + "\n")
        if records:
            out.flush()


def serve(cfg: StreamConfig, models: LoadedModels | None = None) -> None:
    """Run the service until end of input (stdin) or client disconnect
    (tcp). Raises DataError for config/model problems, OSError for bind
    failures."""
    if models is None:
        models = load_models(cfg)
    session = StreamSession(cfg, models)
    if cfg.transport == "stdin":
        try:
            _pump(session, sys.stdin, sys.stdout, sys.stderr)
        except KeyboardInterrupt:
            pass
        return
    if cfg.transport != "tcp":
        raise DataError(f"unknown transport {cfg.transport!r}")
    host, _, port = (cfg.listen or "127.0.0.1:0").rpartition(":")
    server = StreamServer(cfg, models, host or "127.0.0.1", int(port))
    try:
        server.serve_one_client(session)
    finally:
        server.close()


class StreamServer:
    """Single-client TCP transport around a StreamSession."""

    def __init__(self, cfg: StreamConfig, models: LoadedModels,
                 host: str = "127.0.0.1", port: int = 0):
        self.cfg = cfg
        self.models = models
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind((host, port))
        self.sock.listen(1)
        self.port = self.sock.getsockname()[1]

    def serve_one_client(self, session: StreamSession | None = None) -> None:
        conn, _ = self.sock.accept()
        try:
            with conn.makefile("r", encoding="utf-8") as rx, \
                    conn.makefile("w", encoding="utf-8") as tx:
                if session is None:
                    session = StreamSession(self.cfg, self.models)
                _pump(session, rx, tx, sys.stderr)
        finally:
            conn.close()

    def close(self) -> None:
        self.sock.close()
