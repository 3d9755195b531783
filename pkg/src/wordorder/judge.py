"""Forced-choice human judgment study: stimulus serving, append-only
judgment logging, and agreement aggregation.

Participants see the preceding context sentence and two candidate
continuations labeled A and B; which side holds the reference is a pure
function of (participant, item, seed) and is never sent to the browser.
An item's human label is 1 only when strictly more than half of its
judges chose the reference (a 6-of-12 split is label 0).
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import asdict, dataclass
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence
from urllib.parse import parse_qs, urlparse

import numpy as np

log = logging.getLogger(__name__)

STIMULUS_FIELDS = {"item_id", "context_text", "reference_text", "variant_text", "construction_tag"}


@dataclass(frozen=True)
class Stimulus:
    item_id: str
    context_text: str
    reference_text: str
    variant_text: str
    construction_tag: str


@dataclass(frozen=True)
class Judgment:
    item_id: str
    participant_id: str
    chose_reference: bool
    presented_reference_first: bool
    timestamp: float


class StimuliError(ValueError):
    pass


def read_stimuli(stream: IO[str] | Iterable[str]) -> list[Stimulus]:
    items = []
    seen = set()
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StimuliError(f"stimuli line {line_no}: invalid JSON ({exc})") from None
        missing = STIMULUS_FIELDS - set(d)
        if missing:
            raise StimuliError(f"stimuli line {line_no}: missing fields {sorted(missing)}")
        if d["item_id"] in seen:
            raise StimuliError(f"stimuli line {line_no}: duplicate item_id {d['item_id']!r}")
        seen.add(d["item_id"])
        items.append(Stimulus(**{k: d[k] for k in STIMULUS_FIELDS}))
    if not items:
        raise StimuliError("stimuli file holds no items")
    return items


def write_stimuli(out: IO[str], items: Sequence[Stimulus]) -> None:
    for s in items:
        out.write(json.dumps(asdict(s), sort_keys=True) + "\n")


def read_judgments(stream: IO[str] | Iterable[str]) -> list[Judgment]:
    out = []
    for line in stream:
        line = line.strip()
        if not line:
            continue
        d = json.loads(line)
        out.append(
            Judgment(
                d["item_id"], d["participant_id"], bool(d["chose_reference"]),
                bool(d["presented_reference_first"]), float(d.get("timestamp", 0.0)),
            )
        )
    return out


def _seeded_bit(seed: int, participant_id: str, item_id: str) -> bool:
    digest = hashlib.blake2b(
        f"{seed}:{participant_id}:{item_id}".encode("utf-8"), digest_size=8
    ).digest()
    return digest[0] % 2 == 0


def _order_key(seed: int, participant_id: str, item_id: str) -> bytes:
    return hashlib.blake2b(
        f"order:{seed}:{participant_id}:{item_id}".encode("utf-8"), digest_size=8
    ).digest()


def presentation_order(seed: int, participant_id: str, items: Sequence[Stimulus]) -> list[Stimulus]:
    """Per-participant item order; reproducible for audit."""
    return sorted(items, key=lambda s: _order_key(seed, participant_id, s.item_id))


def reference_first(seed: int, participant_id: str, item_id: str) -> bool:
    return _seeded_bit(seed, participant_id, item_id)


def _pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson r, or None when undefined (a constant vector); None keeps
    the aggregate table valid strict JSON for browser clients."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2 or x.std() == 0.0 or y.std() == 0.0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def aggregate_judgments(
    stimuli: Sequence[Stimulus],
    judgments: Sequence[Judgment],
    predictions: Mapping[str, Mapping] | None = None,
) -> dict:
    """Per-construction and total agreement table.

    ``predictions`` maps item_id to {"prefers_reference": bool,
    "probability": float} from the ranker; model columns appear only
    when it is given.  Items with zero judgments are excluded.
    """
    votes: dict[str, dict[str, bool]] = {}
    for j in judgments:
        votes.setdefault(j.item_id, {})
        # replayed submissions must not double-count: first vote wins
        votes[j.item_id].setdefault(j.participant_id, j.chose_reference)

    items = []
    for s in stimuli:
        item_votes = votes.get(s.item_id, {})
        if not item_votes:
            log.warning("item %r has no judgments; excluded", s.item_id)
            continue
        n = len(item_votes)
        n_ref = sum(item_votes.values())
        human_label = 1 if 2 * n_ref > n else 0
        row = {
            "item_id": s.item_id,
            "construction_tag": s.construction_tag,
            "judgments": n,
            "reference_votes": n_ref,
            "human_label": human_label,
        }
        if predictions is not None:
            pred = predictions.get(s.item_id)
            if pred is not None:
                row["model_prefers_reference"] = bool(pred["prefers_reference"])
                row["model_probability"] = float(pred.get("probability", float("nan")))
        items.append(row)

    def table_row(rows):
        out = {
            "items": len(rows),
            "agreement_pct": 100.0 * sum(r["human_label"] for r in rows) / len(rows),
        }
        modeled = [r for r in rows if "model_prefers_reference" in r]
        if modeled:
            out["model_corpus_pct"] = (
                100.0 * sum(r["model_prefers_reference"] for r in modeled) / len(modeled)
            )
            out["model_human_pct"] = (
                100.0
                * sum(r["model_prefers_reference"] == bool(r["human_label"]) for r in modeled)
                / len(modeled)
            )
        return out

    by_tag: dict[str, list] = {}
    for r in items:
        by_tag.setdefault(r["construction_tag"], []).append(r)
    result = {
        "per_construction": {tag: table_row(rows) for tag, rows in sorted(by_tag.items())},
        "total": table_row(items) if items else {"items": 0},
        "items": items,
    }
    modeled = [r for r in items if "model_probability" in r]
    if modeled:
        probs = [r["model_probability"] for r in modeled]
        result["pearson"] = {
            "vs_human": _pearson(probs, [r["human_label"] for r in modeled]),
            "vs_corpus": _pearson(probs, [1.0] * len(modeled)),
        }
    return result


FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>judgment service</title></head>
<body><h1>Judgment service</h1>
<p>No UI bundle configured. API endpoints:</p>
<ul>
<li>GET /api/stimuli/next?participant=P</li>
<li>POST /api/judgments {item_id, participant_id, selected: "A"|"B"}</li>
<li>GET /api/results</li>
</ul></body></html>
"""

ALLOWED_STATIC_SUFFIXES = {".html", ".js", ".css", ".map", ".ico", ".svg", ".png"}
CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
    ".png": "image/png",
}


class JudgeService:
    """Study state: stimuli, answered sets, and the append-only log."""

    def __init__(self, stimuli, log_path, seed=0, predictions=None, assets_dir=None):
        self.stimuli = list(stimuli)
        self.by_id = {s.item_id: s for s in self.stimuli}
        self.log_path = Path(log_path)
        self.seed = seed
        self.predictions = predictions
        self.assets_dir = Path(assets_dir) if assets_dir else None
        self._lock = threading.Lock()
        self.judgments: list[Judgment] = []
        self.answered: set[tuple[str, str]] = set()
        if self.log_path.exists():
            with self.log_path.open("r", encoding="utf-8") as fh:
                for j in read_judgments(fh):
                    self.judgments.append(j)
                    self.answered.add((j.participant_id, j.item_id))
        self._log_file = self.log_path.open("a", encoding="utf-8")

    def close(self):
        self._log_file.close()

    def next_stimulus(self, participant_id: str) -> dict:
        answered = sum(1 for p, _ in self.answered if p == participant_id)
        for s in presentation_order(self.seed, participant_id, self.stimuli):
            if (participant_id, s.item_id) in self.answered:
                continue
            ref_first = reference_first(self.seed, participant_id, s.item_id)
            option_a = s.reference_text if ref_first else s.variant_text
            option_b = s.variant_text if ref_first else s.reference_text
            return {
                "item_id": s.item_id,
                "context_text": s.context_text,
                "option_a_text": option_a,
                "option_b_text": option_b,
                "answered": answered,
                "total": len(self.stimuli),
            }
        return {"done": True, "answered": answered, "total": len(self.stimuli)}

    def submit(self, payload: Mapping) -> tuple[int, dict]:
        for key in ("item_id", "participant_id", "selected"):
            if key not in payload:
                return HTTPStatus.BAD_REQUEST, {"error": f"missing field {key!r}"}
        item_id = str(payload["item_id"])
        participant_id = str(payload["participant_id"])
        selected = payload["selected"]
        if selected not in ("A", "B"):
            return HTTPStatus.BAD_REQUEST, {"error": "selected must be 'A' or 'B'"}
        if item_id not in self.by_id:
            return HTTPStatus.NOT_FOUND, {"error": f"unknown item {item_id!r}"}
        with self._lock:
            if (participant_id, item_id) in self.answered:
                return HTTPStatus.CONFLICT, {"error": "already judged", "duplicate": True}
            ref_first = reference_first(self.seed, participant_id, item_id)
            judgment = Judgment(
                item_id, participant_id,
                chose_reference=(selected == "A") == ref_first,
                presented_reference_first=ref_first,
                timestamp=time.time(),
            )
            self._log_file.write(json.dumps(asdict(judgment), sort_keys=True) + "\n")
            self._log_file.flush()
            self.judgments.append(judgment)
            self.answered.add((participant_id, item_id))
        return HTTPStatus.CREATED, {"status": "recorded"}

    def results(self) -> dict:
        with self._lock:
            judgments = list(self.judgments)
        return aggregate_judgments(self.stimuli, judgments, self.predictions)

    def static_asset(self, path: str) -> tuple[bytes, str] | None:
        if path in ("/", "/index.html"):
            if self.assets_dir is not None and (self.assets_dir / "index.html").exists():
                return (self.assets_dir / "index.html").read_bytes(), CONTENT_TYPES[".html"]
            return FALLBACK_PAGE.encode("utf-8"), CONTENT_TYPES[".html"]
        if self.assets_dir is None:
            return None
        name = path.lstrip("/")
        target = (self.assets_dir / name).resolve()
        if (
            self.assets_dir.resolve() not in target.parents
            or target.suffix not in ALLOWED_STATIC_SUFFIXES
            or not target.is_file()
        ):
            return None
        return target.read_bytes(), CONTENT_TYPES.get(target.suffix, "application/octet-stream")


class _Handler(BaseHTTPRequestHandler):
    service: JudgeService  # set by make_server

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)

    def _send_json(self, status, payload):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(int(status))
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/api/stimuli/next":
            params = parse_qs(url.query)
            participant = params.get("participant", [""])[0]
            if not participant:
                self._send_json(HTTPStatus.BAD_REQUEST, {"error": "participant required"})
                return
            self._send_json(HTTPStatus.OK, self.service.next_stimulus(participant))
            return
        if url.path == "/api/results":
            self._send_json(HTTPStatus.OK, self.service.results())
            return
        asset = self.service.static_asset(url.path)
        if asset is None:
            self._send_json(HTTPStatus.NOT_FOUND, {"error": "not found"})
            return
        body, ctype = asset
        self.send_response(HTTPStatus.OK)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/api/judgments":
            self._send_json(HTTPStatus.NOT_FOUND, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length", 0))
        try:
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
        except json.JSONDecodeError:
            self._send_json(HTTPStatus.BAD_REQUEST, {"error": "invalid JSON body"})
            return
        status, body = self.service.submit(payload)
        self._send_json(status, body)


def make_server(service: JudgeService, host: str = "127.0.0.1", port: int = 8765) -> ThreadingHTTPServer:
    """Bound, ready-to-serve HTTP server; raises OSError if the port is taken."""
    handler = type("JudgeHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: JudgeService, host: str, port: int) -> None:
    server = make_server(service, host, port)
    log.info("judgment service on http://%s:%d (%d items)", host, port, len(service.stimuli))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.close()
