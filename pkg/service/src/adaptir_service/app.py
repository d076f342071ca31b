"""FastAPI app implementing the pair-scoring wire protocol.

POST /score takes {"pairs": [{"query": str, "doc": str}, ...]} and
returns {"scores": [float, ...]} with one score per pair, same order.
Malformed requests get a 400; backend failures get a 500. GET /health
answers "ok". Request bodies are validated by hand so every shape
problem lands on the same 400 path.
"""

from __future__ import annotations

import json
from typing import Protocol, Sequence

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse


class PairBackend(Protocol):
    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


def parse_pairs(payload: object) -> list[tuple[str, str]]:
    """Validate a decoded /score body, returning its (query, doc) pairs."""
    if not isinstance(payload, dict) or "pairs" not in payload:
        raise ValueError('body must be a JSON object with a "pairs" field')
    raw = payload["pairs"]
    if not isinstance(raw, list):
        raise ValueError('"pairs" must be a list')
    pairs = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ValueError(f"pairs[{i}] must be an object")
        query, doc = item.get("query"), item.get("doc")
        if not isinstance(query, str) or not isinstance(doc, str):
            raise ValueError(f'pairs[{i}] needs string "query" and "doc" fields')
        pairs.append((query, doc))
    return pairs


def build_app(backend: PairBackend) -> FastAPI:
    app = FastAPI(title="adaptir-service")

    @app.get("/health")
    def health() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.post("/score")
    async def score(request: Request) -> JSONResponse:
        body = await request.body()
        try:
            pairs = parse_pairs(json.loads(body))
        except ValueError as exc:
            return JSONResponse({"error": f"malformed request: {exc}"}, status_code=400)
        try:
            scores = [float(s) for s in backend.score_pairs(pairs)]
        except Exception as exc:  # noqa: BLE001 - any backend failure becomes a 500
            return JSONResponse({"error": f"scoring failed: {exc}"}, status_code=500)
        if len(scores) != len(pairs):
            return JSONResponse(
                {"error": f"backend returned {len(scores)} scores for {len(pairs)} pairs"},
                status_code=500,
            )
        return JSONResponse({"scores": scores})

    return app
