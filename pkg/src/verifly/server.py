"""Line-delimited JSON daemon.

The request loop owns the file table and the generation counter. Analysis
runs on one worker thread that owns the :class:`Analyzer`; jobs are handed
over as immutable snapshots of the file table. A newer edit cancels the job
in flight, and every ``open``/``edit``/``check`` request is answered exactly
once: either with diagnostics for the latest generation or with a
``superseded`` marker.
"""

from __future__ import annotations

import json
import logging
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import TextIO

from .engine import Cancelled, CancelToken
from .workspace import Analyzer, Config, TimingStats

log = logging.getLogger(__name__)

METHODS = ("open", "edit", "check", "stats", "shutdown")


class ProtocolError(Exception):
    def __init__(self, code: str, message: str, seq=None) -> None:
        super().__init__(message)
        self.code = code
        self.seq = seq


@dataclass
class _Job:
    generation: int
    files: dict
    deadline: float
    waiting: list = field(default_factory=list)  # request seqs this job will answer
    token: CancelToken = field(default_factory=CancelToken)


def parse_request(line: str) -> dict:
    try:
        req = json.loads(line)
    except (json.JSONDecodeError, RecursionError) as err:
        raise ProtocolError("proto.malformed", f"invalid JSON: {err}") from None
    if not isinstance(req, dict):
        raise ProtocolError("proto.malformed", "request must be a JSON object")
    seq = req.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise ProtocolError("proto.malformed", "field 'seq' must be an integer")
    method = req.get("method")
    if not isinstance(method, str):
        raise ProtocolError("proto.malformed", "field 'method' must be a string", seq)
    if method not in METHODS:
        raise ProtocolError("proto.unknown", f"unknown method {method!r}", seq)
    if method in ("open", "edit"):
        if not isinstance(req.get("file"), str) or not req["file"]:
            raise ProtocolError("proto.malformed", f"'{method}' needs a string field 'file'", seq)
        if method == "edit" and not isinstance(req.get("text"), str):
            raise ProtocolError("proto.malformed", "'edit' needs a string field 'text'", seq)
        if "text" in req and not isinstance(req["text"], str):
            raise ProtocolError("proto.malformed", "field 'text' must be a string", seq)
    return req


class Daemon:
    def __init__(self, config: Config, out: TextIO, analyzer: Analyzer | None = None) -> None:
        self.config = config
        self.out = out
        self.analyzer = analyzer or Analyzer(config)
        if config.snapshot:
            self.analyzer.load_snapshot(config.snapshot)
        self.files: dict = {}
        self.generation = 0
        self.last_stats = TimingStats()
        self.last_generation = 0
        self.runs = 0
        self._cv = threading.Condition()
        self._pending: _Job | None = None
        self._running: _Job | None = None
        self._stop = False
        self._out_lock = threading.Lock()
        self._worker = threading.Thread(target=self._work, name="verifly-analysis", daemon=True)
        self._worker.start()

    # -- output
    def send(self, obj: dict) -> None:
        line = json.dumps(obj, separators=(",", ":"))
        with self._out_lock:
            self.out.write(line + "\n")
            self.out.flush()

    def _superseded(self, seqs, generation: int) -> None:
        for s in seqs:
            self.send({"seq": s, "generation": generation, "superseded": True})

    # -- request loop side
    def handle_line(self, line: str) -> bool:
        """Handle one wire line. Returns False once the daemon should exit."""
        if not line.strip():
            return True
        try:
            req = parse_request(line)
        except ProtocolError as err:
            self.send({"seq": err.seq, "error": {"code": err.code, "message": str(err)}})
            return True
        return self.handle_request(req)

    def handle_request(self, req: dict) -> bool:
        method, seq = req["method"], req["seq"]
        if method in ("open", "edit"):
            text = req.get("text")
            if text is None:
                try:
                    with open(req["file"], encoding="utf-8") as fh:
                        text = fh.read()
                except (OSError, UnicodeDecodeError) as err:
                    self.send({"seq": seq, "error": {"code": "io.unreadable", "message": f"cannot read {req['file']}: {err}"}})
                    return True
            self.files[req["file"]] = text
            self.generation += 1
            self._schedule(seq, self.config.debounce_ms / 1000.0)
        elif method == "check":
            self._schedule(seq, 0.0)
        elif method == "stats":
            with self._cv:
                stats, gen = self.last_stats, self.last_generation
            self.send({"seq": seq, "generation": gen, "stats": stats.to_json()})
        elif method == "shutdown":
            self.shutdown()
            self.send({"seq": seq, "generation": self.last_generation, "shutdown": True})
            return False
        return True

    def _schedule(self, seq: int, delay: float) -> None:
        with self._cv:
            job = _Job(self.generation, dict(self.files), time.monotonic() + delay, [seq])
            stale: list = []
            if self._pending is not None:
                if self._pending.generation == job.generation:
                    # same program: fold into the pending job, possibly sooner
                    self._pending.waiting.append(seq)
                    self._pending.deadline = min(self._pending.deadline, job.deadline)
                    self._cv.notify_all()
                    return
                stale = self._pending.waiting
            running = self._running
            if running is not None and running.generation == job.generation and self._pending is None:
                running.waiting.append(seq)
                return
            if running is not None and running.generation < job.generation:
                running.token.cancel()
            self._pending = job
            self._cv.notify_all()
        self._superseded(stale, job.generation)

    def shutdown(self, drain: bool = True) -> None:
        """Stop the worker. With ``drain``, outstanding jobs run first so no edit is lost."""
        if drain and self._worker.is_alive():
            with self._cv:
                if self._pending is not None:
                    self._pending.deadline = 0.0
                    self._cv.notify_all()
            self.wait_idle()
        with self._cv:
            self._stop = True
            leftovers = []
            if self._pending is not None:
                leftovers = self._pending.waiting
                self._pending = None
            if self._running is not None:
                self._running.token.cancel()
            self._cv.notify_all()
        self._worker.join()
        self._superseded(leftovers, self.generation)
        if self.config.snapshot:
            try:
                self.analyzer.save_snapshot()
            except OSError as err:
                log.error("cannot write snapshot: %s", err)

    def wait_idle(self, timeout: float = 30.0) -> bool:
        """Block until no job is pending or running (test helper)."""
        end = time.monotonic() + timeout
        with self._cv:
            while self._pending is not None or self._running is not None:
                left = end - time.monotonic()
                if left <= 0:
                    return False
                self._cv.wait(left)
        return True

    # -- worker side
    def _work(self) -> None:
        while True:
            with self._cv:
                while not self._stop:
                    job = self._pending
                    if job is not None:
                        wait = job.deadline - time.monotonic()
                        if wait <= 0:
                            break
                        self._cv.wait(wait)
                    else:
                        self._cv.wait()
                if self._stop:
                    return
                self._pending, self._running = None, job
            failed = False
            try:
                result = self.analyzer.run(job.files, job.generation, job.token)
            except Cancelled:
                log.debug("analysis of generation %d cancelled", job.generation)
                result = None
            except Exception:  # keep serving whatever the failure
                log.exception("analysis of generation %d failed", job.generation)
                result, failed = None, True
            with self._cv:
                self._running = None
                if result is not None and job.generation == self.generation:
                    self.runs += 1
                    self.last_stats, self.last_generation = result.stats, result.generation
                    for s in job.waiting:
                        self.send({
                            "seq": s,
                            "generation": result.generation,
                            "diagnostics": result.diagnostics_json(),
                            "stats": result.stats.to_json(),
                        })
                    if self.config.snapshot:
                        try:
                            self.analyzer.save_snapshot()
                        except OSError as err:
                            log.error("cannot write snapshot: %s", err)
                elif failed and job.generation == self.generation:
                    for s in job.waiting:
                        self.send({"seq": s, "error": {"code": "analysis.failed", "message": "analysis failed; see log"}})
                else:
                    # a newer generation exists (or we are stopping); its job answers
                    self._superseded(job.waiting, self.generation)
                self._cv.notify_all()


def serve(config: Config, input_stream: TextIO | None = None, out: TextIO | None = None) -> int:
    daemon = Daemon(config, out or sys.stdout)
    stream = input_stream or sys.stdin
    while True:
        try:
            line = stream.readline()
        except UnicodeDecodeError as err:
            daemon.send({"seq": None, "error": {"code": "proto.malformed", "message": f"undecodable input: {err}"}})
            continue
        if not line:
            daemon.shutdown()
            return 0
        if not daemon.handle_line(line):
            return 0
