"""cbqr-scorer v1 wire protocol: line-delimited JSON over stdio.

On startup the scorer emits one handshake line
    {"protocol": "cbqr-scorer", "version": 1}
then answers requests
    {"id": <u64>, "h": H, "w": W, "pixels_b64": <base64 float32 LE>}
with responses
    {"id": <u64>, "logit": <float>}
Responses may arrive in any order; the client matches them by id.
"""
from __future__ import annotations

import base64
import json
import subprocess
import sys

import numpy as np

from .errors import ScorerProtocolError

PROTOCOL_NAME = "cbqr-scorer"
PROTOCOL_VERSION = 1
HANDSHAKE = {"protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION}


def encode_pixels(image: np.ndarray) -> str:
    arr = np.ascontiguousarray(np.asarray(image, dtype="<f4"))
    return base64.b64encode(arr.tobytes()).decode("ascii")


def decode_pixels(text: str, h: int, w: int) -> np.ndarray:
    raw = base64.b64decode(text, validate=True)
    arr = np.frombuffer(raw, dtype="<f4")
    if arr.size != h * w:
        raise ValueError(f"pixel payload holds {arr.size} values, expected {h * w}")
    return arr.reshape(h, w).astype(np.float64)


def serve(scorer, fin=None, fout=None, ferr=None) -> None:
    """Answer requests on fin/fout until EOF.

    Malformed lines produce an error response when an id is recoverable,
    otherwise they are logged to ferr and skipped.
    """
    fin = fin if fin is not None else sys.stdin
    fout = fout if fout is not None else sys.stdout
    ferr = ferr if ferr is not None else sys.stderr

    def emit(obj: dict) -> None:
        fout.write(json.dumps(obj, separators=(",", ":")) + "\n")
        fout.flush()

    emit(HANDSHAKE)
    for line in fin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            print(f"cbqr-scorer: skipping unparseable line: {exc}", file=ferr)
            continue
        rid = msg.get("id") if isinstance(msg, dict) else None
        try:
            if rid is None:
                raise ValueError("request has no id")
            image = decode_pixels(msg["pixels_b64"], int(msg["h"]), int(msg["w"]))
            emit({"id": rid, "logit": float(scorer(image))})
        except Exception as exc:  # noqa: BLE001 - serve loop must stay up
            if rid is None:
                print(f"cbqr-scorer: skipping bad request: {exc}", file=ferr)
            else:
                emit({"id": rid, "error": str(exc)})


class ExternalScorer:
    """Client for a scorer process speaking cbqr-scorer v1.

    One request in flight per instance; responses arriving out of order
    (from scorers that pipeline internally) are buffered and matched by
    id. Usable as a context manager and directly as a scorer callable.
    """

    def __init__(self, command: list[str]):
        self._proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True, bufsize=1)
        self._pending: dict[int, dict] = {}
        self._next_id = 1
        line = self._proc.stdout.readline()
        try:
            handshake = json.loads(line)
        except json.JSONDecodeError as exc:
            self.close()
            raise ScorerProtocolError(f"bad handshake line {line!r}") from exc
        if handshake != HANDSHAKE:
            self.close()
            raise ScorerProtocolError(f"unexpected handshake {handshake!r}")

    def _read_until(self, rid: int) -> dict:
        while rid not in self._pending:
            line = self._proc.stdout.readline()
            if not line:
                raise ScorerProtocolError("scorer closed its stdout")
            try:
                msg = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScorerProtocolError(f"unparseable response {line!r}") from exc
            got = msg.get("id")
            if got is None:
                raise ScorerProtocolError(f"response without id: {msg!r}")
            self._pending[int(got)] = msg
        return self._pending.pop(rid)

    def score(self, image: np.ndarray) -> float:
        h, w = np.asarray(image).shape
        rid = self._next_id
        self._next_id += 1
        request = {"id": rid, "h": int(h), "w": int(w),
                   "pixels_b64": encode_pixels(image)}
        self._proc.stdin.write(json.dumps(request, separators=(",", ":")) + "\n")
        self._proc.stdin.flush()
        msg = self._read_until(rid)
        if "error" in msg:
            raise ScorerProtocolError(f"scorer error for id {rid}: {msg['error']}")
        if "logit" not in msg:
            raise ScorerProtocolError(f"response missing logit: {msg!r}")
        return float(msg["logit"])

    __call__ = score

    def close(self) -> None:
        if self._proc.stdin:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        self._proc.terminate()
        self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def run_conformance(command: list[str], n_requests: int = 1000,
                    seed: int = 0, reference=None,
                    rtol: float = 1e-6) -> dict:
    """Drive a scorer process with randomized requests and verify the
    protocol contract: handshake, id echo, one well-formed finite logit
    per request, optional agreement with a reference scorer.
    """
    rng = np.random.default_rng(seed)
    ids = rng.permutation(np.arange(1, n_requests + 1) * 7 + 3).tolist()
    mismatches: list[str] = []
    checked = 0
    with ExternalScorer(command) as client:
        for rid in ids:
            h = int(rng.integers(8, 48))
            w = int(rng.integers(8, 48))
            image = rng.random((h, w))
            request = {"id": int(rid), "h": h, "w": w,
                       "pixels_b64": encode_pixels(image)}
            client._proc.stdin.write(json.dumps(request) + "\n")
            client._proc.stdin.flush()
            # exactly one request in flight: read exactly one response, so
            # a scorer that mangles ids cannot stall the driver
            line = client._proc.stdout.readline()
            if not line:
                mismatches.append(f"id {rid}: scorer closed stdout")
                break
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                mismatches.append(f"id {rid}: unparseable response {line!r}")
                continue
            if msg.get("id") != int(rid):
                mismatches.append(f"id {rid}: echoed id {msg.get('id')!r}")
                continue
            if "logit" not in msg or not np.isfinite(msg["logit"]):
                mismatches.append(f"id {rid}: bad logit in {msg!r}")
                continue
            if reference is not None:
                expect = float(reference(image.astype(np.float64)))
                got = float(msg["logit"])
                if abs(got - expect) > rtol * max(1.0, abs(expect)):
                    mismatches.append(f"id {rid}: logit {got} != reference {expect}")
                    continue
            checked += 1
    return {"handshake_ok": True, "n_sent": len(ids), "n_ok": checked,
            "mismatches": mismatches}
