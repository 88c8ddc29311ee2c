"""Persisting a fixpointed analysis graph.

Binary layout (all integers big-endian)::

    magic    b"CIAOGRAPH\\0"
    u16      format version
    u64      program fingerprint
    str16    domain name (u16 length, UTF-8)
    section  nodes      u32 byte length, then u32 count, then (key, opt-bytes success) records
    section  entries    u32 byte length, then u32 count, then keys
    section  arcs       u32 byte length, then u32 count, then (key, u64 clause key, u32 occurrence, u32 position, key)
    section  unknown    u32 byte length, then u32 count, then (key, u64, u32, u32 npreds, preds)

A key is ``pred`` (str16 name, u16 arity) followed by an optional byte
string of ``arity`` bytes (u8 presence flag). Records are written in a
canonical order, and run statistics are not stored, so equal graphs give
byte-identical snapshots.

The JSON variant carries the same fields with byte strings as hex.
"""

from __future__ import annotations

import json
import struct

from .engine import FIXPOINTED, AnalysisGraph, AnalysisNode, key_order

MAGIC = b"CIAOGRAPH\0"
VERSION = 1
JSON_FORMAT = "verifly-snapshot"


class SnapshotError(ValueError):
    """The data is not a readable snapshot."""


class StaleSnapshot(SnapshotError):
    """The snapshot belongs to another program version or format version."""


# ---------------------------------------------------------------------------
# binary


class _Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def u8(self, v: int) -> None:
        self.parts.append(struct.pack(">B", v))

    def u16(self, v: int) -> None:
        self.parts.append(struct.pack(">H", v))

    def u32(self, v: int) -> None:
        self.parts.append(struct.pack(">I", v))

    def u64(self, v: int) -> None:
        self.parts.append(struct.pack(">Q", v))

    def str16(self, s: str) -> None:
        b = s.encode("utf-8")
        self.u16(len(b))
        self.parts.append(b)

    def opt_bytes(self, b: bytes | None, n: int) -> None:
        if b is None:
            self.u8(0)
            return
        if len(b) != n:
            raise SnapshotError(f"pattern of length {len(b)} for arity {n}")
        self.u8(1)
        self.parts.append(bytes(b))

    def key(self, k: tuple) -> None:
        (name, arity), call = k
        self.str16(name)
        self.u16(arity)
        self.opt_bytes(call, arity)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SnapshotError("truncated snapshot")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def _unpack(self, fmt: str, n: int) -> int:
        return struct.unpack(fmt, self.take(n))[0]

    def u8(self) -> int:
        return self._unpack(">B", 1)

    def u16(self) -> int:
        return self._unpack(">H", 2)

    def u32(self) -> int:
        return self._unpack(">I", 4)

    def u64(self) -> int:
        return self._unpack(">Q", 8)

    def str16(self) -> str:
        try:
            return self.take(self.u16()).decode("utf-8")
        except UnicodeDecodeError as err:
            raise SnapshotError(f"bad name: {err}") from None

    def opt_bytes(self, n: int) -> bytes | None:
        flag = self.u8()
        if flag == 0:
            return None
        if flag != 1:
            raise SnapshotError("bad presence flag")
        return self.take(n)

    def key(self) -> tuple:
        name = self.str16()
        arity = self.u16()
        return ((name, arity), self.opt_bytes(arity))

    def section(self) -> _Reader:
        return _Reader(self.take(self.u32()))

    def done(self) -> bool:
        return self.pos == len(self.data)


def _sorted_arcs(graph: AnalysisGraph) -> list:
    rows = [(src[0], src[1], pos, tgt) for src, ts in graph.arcs.items() for pos, tgt in ts.items()]
    rows.sort(key=lambda r: key_order(r[0]) + r[1] + (r[2],))
    return rows


def _sorted_unknown(graph: AnalysisGraph) -> list:
    rows = [(src[0], src[1], sorted(ps)) for src, ps in graph.unknown.items()]
    rows.sort(key=lambda r: key_order(r[0]) + r[1])
    return rows


def _section(w: _Writer, body: _Writer) -> None:
    raw = body.getvalue()
    w.u32(len(raw))
    w.parts.append(raw)


def save_snapshot(graph: AnalysisGraph, fingerprint: int | None = None) -> bytes:
    fp = graph.fingerprint if fingerprint is None else fingerprint
    w = _Writer()
    w.parts.append(MAGIC)
    w.u16(VERSION)
    w.u64(fp)
    w.str16(graph.domain)

    body = _Writer()
    keys = sorted(graph.nodes, key=key_order)
    body.u32(len(keys))
    for k in keys:
        body.key(k)
        body.opt_bytes(graph.nodes[k].success, k[0][1])
    _section(w, body)

    body = _Writer()
    body.u32(len(graph.entry_keys))
    for k in graph.entry_keys:
        body.key(k)
    _section(w, body)

    body = _Writer()
    arcs = _sorted_arcs(graph)
    body.u32(len(arcs))
    for src, (ck, occ), pos, tgt in arcs:
        body.key(src)
        body.u64(ck)
        body.u32(occ)
        body.u32(pos)
        body.key(tgt)
    _section(w, body)

    body = _Writer()
    unknown = _sorted_unknown(graph)
    body.u32(len(unknown))
    for src, (ck, occ), preds in unknown:
        body.key(src)
        body.u64(ck)
        body.u32(occ)
        body.u32(len(preds))
        for name, arity in preds:
            body.str16(name)
            body.u16(arity)
    _section(w, body)
    return w.getvalue()


def _load_binary(data: bytes) -> AnalysisGraph:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise SnapshotError("bad magic header")
    version = r.u16()
    if version != VERSION:
        raise StaleSnapshot(f"snapshot format version {version}, expected {VERSION}")
    fp = r.u64()
    graph = AnalysisGraph(r.str16(), fp)

    s = r.section()
    for _ in range(s.u32()):
        k = s.key()
        graph.nodes[k] = AnalysisNode(k, s.opt_bytes(k[0][1]), FIXPOINTED)
    s = r.section()
    graph.entry_keys = [s.key() for _ in range(s.u32())]
    s = r.section()
    for _ in range(s.u32()):
        src = s.key()
        cid = (s.u64(), s.u32())
        pos = s.u32()
        graph.arcs.setdefault((src, cid), {})[pos] = s.key()
    s = r.section()
    for _ in range(s.u32()):
        src = s.key()
        cid = (s.u64(), s.u32())
        bucket = graph.unknown.setdefault((src, cid), {})
        for _ in range(s.u32()):
            name = s.str16()
            bucket[(name, s.u16())] = None
    if not r.done():
        raise SnapshotError("trailing bytes after snapshot")
    return graph


# ---------------------------------------------------------------------------
# JSON


def _key_json(k: tuple) -> dict:
    (name, arity), call = k
    return {"pred": [name, arity], "call": None if call is None else call.hex()}


def _key_from_json(obj) -> tuple:
    name, arity = obj["pred"]
    call = obj["call"]
    call = None if call is None else bytes.fromhex(call)
    if not isinstance(name, str) or not isinstance(arity, int) or (call is not None and len(call) != arity):
        raise SnapshotError(f"bad key {obj!r}")
    return ((name, arity), call)


def save_snapshot_json(graph: AnalysisGraph, fingerprint: int | None = None) -> bytes:
    fp = graph.fingerprint if fingerprint is None else fingerprint
    doc = {
        "format": JSON_FORMAT,
        "version": VERSION,
        "fingerprint": f"{fp:016x}",
        "domain": graph.domain,
        "nodes": [
            dict(_key_json(k), success=None if graph.nodes[k].success is None else graph.nodes[k].success.hex())
            for k in sorted(graph.nodes, key=key_order)
        ],
        "entries": [_key_json(k) for k in graph.entry_keys],
        "arcs": [
            {"from": _key_json(src), "clause": [f"{ck:016x}", occ], "pos": pos, "to": _key_json(tgt)}
            for src, (ck, occ), pos, tgt in _sorted_arcs(graph)
        ],
        "unknown": [
            {"from": _key_json(src), "clause": [f"{ck:016x}", occ], "preds": [[n, a] for n, a in preds]}
            for src, (ck, occ), preds in _sorted_unknown(graph)
        ],
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def _load_json(data: bytes) -> AnalysisGraph:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise SnapshotError(f"bad JSON snapshot: {err}") from None
    if not isinstance(doc, dict) or doc.get("format") != JSON_FORMAT:
        raise SnapshotError("not a snapshot document")
    if doc.get("version") != VERSION:
        raise StaleSnapshot(f"snapshot format version {doc.get('version')}, expected {VERSION}")
    try:
        graph = AnalysisGraph(doc["domain"], int(doc["fingerprint"], 16))
        for n in doc["nodes"]:
            k = _key_from_json(n)
            succ = None if n["success"] is None else bytes.fromhex(n["success"])
            graph.nodes[k] = AnalysisNode(k, succ, FIXPOINTED)
        graph.entry_keys = [_key_from_json(k) for k in doc["entries"]]
        for a in doc["arcs"]:
            cid = (int(a["clause"][0], 16), a["clause"][1])
            graph.arcs.setdefault((_key_from_json(a["from"]), cid), {})[a["pos"]] = _key_from_json(a["to"])
        for u in doc["unknown"]:
            cid = (int(u["clause"][0], 16), u["clause"][1])
            bucket = graph.unknown.setdefault((_key_from_json(u["from"]), cid), {})
            for name, arity in u["preds"]:
                bucket[(name, arity)] = None
    except (KeyError, TypeError, ValueError, IndexError) as err:
        if isinstance(err, SnapshotError):
            raise
        raise SnapshotError(f"malformed snapshot field: {err!r}") from None
    return graph


# ---------------------------------------------------------------------------


def load_snapshot(data: bytes, expected_fingerprint: int | None = None) -> tuple[AnalysisGraph, int]:
    """Decode either format. Raises :class:`StaleSnapshot` if the fingerprint differs."""
    graph = _load_binary(data) if data.startswith(MAGIC) else _load_json(data)
    problems = [k for k in graph.entry_keys if k not in graph.nodes]
    for targets in graph.arcs.values():
        problems += [t for t in targets.values() if t not in graph.nodes]
    problems += [src[0] for src in list(graph.arcs) + list(graph.unknown) if src[0] not in graph.nodes]
    if problems:
        raise SnapshotError(f"snapshot references missing node {problems[0]!r}")
    graph.rebuild_indexes()
    if expected_fingerprint is not None and graph.fingerprint != expected_fingerprint:
        raise StaleSnapshot(
            f"snapshot fingerprint {graph.fingerprint:016x} does not match program {expected_fingerprint:016x}"
        )
    return graph, graph.fingerprint


def dump(graph: AnalysisGraph, fmt: str = "bin") -> bytes:
    if fmt == "bin":
        return save_snapshot(graph)
    if fmt == "json":
        return save_snapshot_json(graph)
    raise ValueError(f"unknown snapshot format {fmt!r}")
