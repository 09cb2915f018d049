"""Line-delimited JSON reward service over HTTP.

POST /score takes one JSON request per line, each holding a serialized
trajectory, a token role mask, and optional per-request weights; the
response body carries one JSON result per request line, in order. Failures
are reported per line so one bad trajectory cannot sink a batch. GET
/healthz answers liveness probes.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Mapping

from .catalog import Persona
from .llm_client import ChatBackend
from .orchestrator import trajectory_from_dict
from .reward import NgramClassifier, RewardWeights, broadcast, score_trajectory

__all__ = ["RewardScorer", "RewardServer", "serve_forever"]


class RewardScorer:
    """Stateless scoring core shared by the HTTP server and the CLI."""

    def __init__(self, personas: Mapping[str, Persona],
                 weights: RewardWeights | None = None,
                 classifier: NgramClassifier | None = None,
                 judge_backend: ChatBackend | None = None) -> None:
        self.personas = dict(personas)
        self.weights = weights or RewardWeights()
        self.classifier = classifier
        self.judge_backend = judge_backend

    def score_request(self, request: Mapping[str, Any]) -> dict[str, Any]:
        """Score one request document; raises on malformed input."""
        if "trajectory" not in request:
            raise ValueError("request is missing 'trajectory'")
        if "token_role_mask" not in request:
            raise ValueError("request is missing 'token_role_mask'")
        trajectory = trajectory_from_dict(request["trajectory"])
        mask = request["token_role_mask"]
        if not isinstance(mask, list) or not all(isinstance(r, str) for r in mask):
            raise ValueError("token_role_mask must be a list of role strings")
        weights = self.weights
        if request.get("weights"):
            weights = RewardWeights.from_mapping(request["weights"])
        persona = self.personas.get(trajectory.persona_id)
        vector = score_trajectory(trajectory, persona, weights,
                                  classifier=self.classifier,
                                  judge_backend=self.judge_backend)
        spread = broadcast(vector.aggregate, mask)
        return {
            "persona_id": trajectory.persona_id,
            "components": dict(vector.components),
            "weights_used": dict(vector.weights_used),
            "aggregate": vector.aggregate,
            "rewards": list(spread.rewards),
        }

    def score_lines(self, body: str) -> list[dict[str, Any]]:
        """Score every non-empty line; errors become per-line results."""
        results: list[dict[str, Any]] = []
        for lineno, line in enumerate(body.splitlines()):
            if not line.strip():
                continue
            try:
                results.append(self.score_request(json.loads(line)))
            except Exception as exc:  # per-line isolation is the contract
                results.append({"error": f"{type(exc).__name__}: {exc}",
                                "line": lineno})
        return results


class _Handler(BaseHTTPRequestHandler):
    scorer: RewardScorer  # set by RewardServer

    def log_message(self, *args: Any) -> None:  # keep test output quiet
        pass

    def _respond(self, status: int, body: bytes,
                 content_type: str = "application/x-ndjson") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path == "/healthz":
            self._respond(200, b'{"status": "ok"}\n', "application/json")
        else:
            self._respond(404, b'{"error": "not found"}\n', "application/json")

    def do_POST(self) -> None:
        if self.path != "/score":
            self._respond(404, b'{"error": "not found"}\n', "application/json")
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length).decode("utf-8")
        results = self.scorer.score_lines(body)
        payload = "".join(json.dumps(r, sort_keys=True) + "\n" for r in results)
        self._respond(200, payload.encode("utf-8"))


class RewardServer:
    """Threaded HTTP wrapper around a RewardScorer."""

    def __init__(self, scorer: RewardScorer, host: str = "127.0.0.1",
                 port: int = 0) -> None:
        handler = type("BoundHandler", (_Handler,), {"scorer": scorer})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def serve_forever(scorer: RewardScorer, host: str, port: int) -> None:
    server = RewardServer(scorer, host=host, port=port)
    try:
        server.httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()
