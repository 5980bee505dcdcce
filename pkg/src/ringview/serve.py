"""HTTP service beside the engine: snapshot reads, steering, and a
server-sent-event stream of new snapshots.

Snapshots are stored and served as the exact JSON text the engine emitted,
so repeated reads of one sequence number are byte-identical.  Each stream
subscriber gets a bounded queue; when a slow consumer falls behind, the
oldest queued snapshot is dropped and the subscriber sees an explicit gap
message before the next one it receives.
"""

from __future__ import annotations

import json
import os
import queue
import threading

from fastapi import FastAPI, HTTPException
from fastapi.responses import RedirectResponse, Response, StreamingResponse

from .config import EngineConfig
from .engine import Engine, SteerCommand
from .errors import SteerRejectedError

SUBSCRIBER_QUEUE_SIZE = 32


class SnapshotHub:
    """Fan-out of immutable snapshot texts to HTTP readers and subscribers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._texts: list[str] = []
        self._subs: list[queue.Queue] = []

    def publish(self, seq: int, text: str) -> None:
        with self._lock:
            assert seq == len(self._texts), "snapshot sequence must be dense"
            self._texts.append(text)
            subs = list(self._subs)
        for q in subs:
            try:
                q.put_nowait((seq, text))
            except queue.Full:
                try:
                    q.get_nowait()  # drop the oldest; the reader sees a gap
                except queue.Empty:
                    pass
                q.put_nowait((seq, text))

    def latest(self) -> tuple[int, str] | None:
        with self._lock:
            if not self._texts:
                return None
            return len(self._texts) - 1, self._texts[-1]

    def get(self, seq: int) -> str | None:
        with self._lock:
            if 0 <= seq < len(self._texts):
                return self._texts[seq]
            return None

    def subscribe(self, maxsize: int = SUBSCRIBER_QUEUE_SIZE) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=maxsize)
        with self._lock:
            self._subs.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subs:
                self._subs.remove(q)


def sse_event_stream(hub: SnapshotHub, q: queue.Queue):
    """Yield server-sent events for one subscriber queue until the client
    goes away.  A jump in sequence numbers (a slow consumer whose queue
    overflowed) is announced with an explicit gap event."""
    last = None
    try:
        while True:
            try:
                seq, text = q.get(timeout=15.0)
            except queue.Empty:
                yield ": keep-alive\n\n"
                continue
            if last is not None and seq != last + 1:
                gap = json.dumps({"type": "gap", "missed_from": last + 1,
                                  "missed_to": seq - 1, "seq": seq})
                yield f"data: {gap}\n\n"
            yield ('data: {"type":"snapshot","seq":%d,"payload":%s}\n\n'
                   % (seq, text))
            last = seq
    finally:
        hub.unsubscribe(q)


def make_app(engine: Engine, hub: SnapshotHub, frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="ringview", docs_url=None, redoc_url=None)

    @app.get("/snapshot/latest")
    def snapshot_latest():
        latest = hub.latest()
        if latest is None:
            raise HTTPException(status_code=404, detail="no snapshot yet")
        return Response(content=latest[1], media_type="application/json")

    @app.get("/snapshot/{seq}")
    def snapshot_at(seq: int):
        text = hub.get(seq)
        if text is None:
            raise HTTPException(status_code=404, detail=f"no snapshot {seq}")
        return Response(content=text, media_type="application/json")

    @app.get("/viewtree")
    def viewtree():
        return engine.describe_tree(include_sql=True)

    @app.post("/steer")
    def steer(cmd: dict):
        try:
            seq = engine.submit_steer(SteerCommand(cmd.get("type"),
                                                   cmd.get("value")))
        except SteerRejectedError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"ok": True, "effective_seq": seq}

    @app.get("/stream")
    def stream():
        return StreamingResponse(sse_event_stream(hub, hub.subscribe()),
                                 media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    if frontend_dir and os.path.isdir(frontend_dir):
        from starlette.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=frontend_dir, html=True),
                  name="ui")

        @app.get("/")
        def index():
            return RedirectResponse(url="/ui/")

    return app


def default_frontend_dir() -> str | None:
    here = os.path.dirname(os.path.abspath(__file__))
    for up in (os.path.join(here, "..", ".."),):
        cand = os.path.normpath(os.path.join(up, "frontend", "dist"))
        if os.path.isdir(cand):
            return cand
    return None


def serve_run(cfg: EngineConfig) -> int:
    """Run the engine on a background thread and serve until interrupted."""
    import uvicorn

    hub = SnapshotHub()
    engine = Engine(cfg)
    engine.on_snapshot = hub.publish
    engine.prepare()
    app = make_app(engine, hub, frontend_dir=default_frontend_dir())
    thread = threading.Thread(target=engine.run, daemon=True)
    thread.start()
    try:
        uvicorn.run(app, host="127.0.0.1", port=cfg.port, log_level="warning")
    finally:
        engine.stop()
    return 0
