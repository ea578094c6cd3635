"""HTTP/JSON surface plus a server-sent event stream of session events."""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import instruct, vsr
from .coverage import tour_document
from .embed import EmbeddingProvider
from .errors import EmptyScene, NoMatch, VsrNavError
from .service import SessionState

__all__ = ["create_app"]


class QueryBody(BaseModel):
    text: str


class InstructionBody(BaseModel):
    text: str
    planner: str = "rule"


def _error(status: int, exc: Exception) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": type(exc).__name__, "message": str(exc)})


def create_app(session: SessionState, provider: EmbeddingProvider,
               llm_client=None, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="vsrnav")

    @app.exception_handler(VsrNavError)
    async def _domain_error(request: Request, exc: VsrNavError):
        return _error(400, exc)

    @app.get("/api/map")
    def get_map():
        return session.map_snapshot()

    @app.get("/api/scene")
    def get_scene():
        return session.scene_snapshot()

    @app.get("/api/tour")
    def get_tour():
        if session.tour is None:
            return {"tour": None}
        return {"tour": tour_document(session.tour)}

    @app.get("/api/state")
    def get_state():
        return session.state_snapshot()

    @app.post("/api/query")
    def post_query(body: QueryBody):
        try:
            psi = provider.embed_text(body.text)
            index, score = vsr.query(session.scene, psi)
        except (NoMatch, EmptyScene) as exc:
            return _error(404, exc)
        obj = session.scene.objects[index]
        session.emit("query", {"text": body.text, "index": index, "score": score,
                               "label": obj.label})
        return {"index": index, "position": obj.position.tolist(),
                "score": score, "label": obj.label}

    @app.post("/api/instruction")
    def post_instruction(body: InstructionBody):
        if not session.try_acquire():
            return JSONResponse(status_code=409, content={
                "error": "Busy", "message": "an instruction is already executing"})
        try:
            if body.planner == "llm":
                if llm_client is None:
                    raise VsrNavError("no language-model client configured")
                plan = instruct.plan_llm(body.text, llm_client)
            else:
                plan = instruct.plan_rule_based(body.text)
        except VsrNavError as exc:
            session.release()
            return _error(400, exc)
        plan_doc = [{"verb": a.verb, "argument": a.argument} for a in plan.actions]
        session.emit("plan", {"instruction": body.text, "source": plan.source,
                              "actions": plan_doc})

        def runner():
            try:
                step_index = {"i": 0}

                def on_step(step):
                    session.emit("step", {
                        "index": step_index["i"],
                        "verb": step.action.verb,
                        "argument": step.action.argument,
                        "outcome": step.outcome,
                        "detail": step.detail,
                        "resolved_index": step.resolved_index,
                        "resolved_score": step.resolved_score,
                        "resolved_position": list(step.resolved_position)
                        if step.resolved_position else None,
                        "pose": list(step.pose) if step.pose else None,
                    })
                    step_index["i"] += 1

                trace = instruct.execute(plan, session.scene, session.world,
                                         session.robot, provider, on_step=on_step)
                session.emit("status", {"status": trace.status})
            finally:
                session.release()

        threading.Thread(target=runner, daemon=True).start()
        return {"plan": plan_doc}

    @app.post("/api/scan")
    def post_scan():
        if not session.try_acquire():
            return JSONResponse(status_code=409, content={
                "error": "Busy", "message": "the session is already running a task"})
        from .coverage import CoverageParams
        from .simworld import CameraModel

        def runner():
            try:
                session.run_scan(CoverageParams(), CameraModel(), provider,
                                 start=session.robot.pose[:2])
            except Exception as exc:  # surfaced on the event stream
                session.emit("error", {"error": type(exc).__name__, "message": str(exc)})
            finally:
                session.release()

        threading.Thread(target=runner, daemon=True).start()
        return {"started": True}

    @app.get("/api/events")
    def get_events(request: Request, follow: bool = True, last_event_id: int = 0):
        header_id = request.headers.get("last-event-id")
        start_seq = int(header_id) if header_id is not None else last_event_id

        def stream():
            cursor = start_seq
            idle = 0.0
            while True:
                batch = (session.wait_for_event(cursor, timeout=0.25)
                         if follow else session.events_after(cursor))
                for event in batch:
                    yield (f"id: {event.seq}\nevent: {event.type}\n"
                           f"data: {json.dumps(event.data)}\n\n")
                    cursor = event.seq
                if not follow:
                    return
                if not batch:
                    idle += 0.25
                    if idle >= 15.0:
                        yield ": keepalive\n\n"
                        idle = 0.0

        return StreamingResponse(stream(), media_type="text/event-stream")

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
