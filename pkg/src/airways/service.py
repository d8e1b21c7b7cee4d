"""HTTP facade for the design studio: project CRUD, optimize, simulate.

Planning and simulation run as jobs on a worker pool; clients poll
GET /api/jobs/{id} or follow GET /api/jobs/{id}/events (server-sent
events mirroring the iteration log). The service adds no numerics of its
own: results are exactly what the library calls return, serialized.

Projects are persisted as raw bytes under the data directory, one file
per name, last write wins.
"""

from __future__ import annotations

import json
import re
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from . import project_io
from .planner import Trajectory, plan_project
from .simulator import SimulationDiverged, simulate_tracking

_NAME_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")
_PLAYBACK_LIMIT = 2000


@dataclass
class Job:
    id: str
    kind: str  # optimize | simulate
    state: str = "queued"  # queued | running | done | failed
    result: dict | None = None
    error: dict | None = None
    events: list = field(default_factory=list)
    created: float = field(default_factory=time.time)
    started: float | None = None
    finished: float | None = None

    def timings(self) -> dict:
        return {"created": self.created, "started": self.started,
                "finished": self.finished}


class JobRegistry:
    """All job state behind one coarse lock; every operation linearizable."""

    def __init__(self, max_workers: int = 4):
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._jobs: dict[str, Job] = {}
        self._pool = ThreadPoolExecutor(max_workers=max_workers)

    def submit(self, kind: str, work) -> str:
        job = Job(id=uuid.uuid4().hex, kind=kind)
        with self._lock:
            self._jobs[job.id] = job
        self._pool.submit(self._run, job, work)
        return job.id

    def _run(self, job: Job, work):
        with self._cond:
            job.state = "running"
            job.started = time.time()
            self._cond.notify_all()
        try:
            result = work(lambda event: self._push_event(job, event))
        except _JobFailure as exc:
            with self._cond:
                job.state = "failed"
                job.error = exc.payload
                job.finished = time.time()
                job.events.append({"type": "failed", **exc.payload})
                self._cond.notify_all()
            return
        except Exception as exc:  # unexpected; surface the message
            with self._cond:
                job.state = "failed"
                job.error = {"message": str(exc)}
                job.finished = time.time()
                job.events.append({"type": "failed", "message": str(exc)})
                self._cond.notify_all()
            return
        with self._cond:
            job.state = "done"
            job.result = result
            job.finished = time.time()
            job.events.append({"type": "done"})
            self._cond.notify_all()

    def _push_event(self, job: Job, event: dict):
        with self._cond:
            job.events.append(event)
            self._cond.notify_all()

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def follow_events(self, job: Job):
        """Yield events as they arrive until the job reaches a terminal
        state."""
        index = 0
        while True:
            with self._cond:
                while index >= len(job.events) and job.state in (
                        "queued", "running"):
                    self._cond.wait(timeout=1.0)
                events = job.events[index:]
                index += len(events)
                terminal = job.state in ("done", "failed") and \
                    index >= len(job.events)
            for event in events:
                yield event
            if terminal:
                return


class _JobFailure(Exception):
    def __init__(self, payload: dict):
        super().__init__(payload.get("message", "job failed"))
        self.payload = payload


def _trajectory_payload(trajectory: Trajectory) -> dict:
    times = trajectory.times()
    rows = np.column_stack([
        times,
        trajectory.positions, trajectory.yaws,
        trajectory.velocities, trajectory.yaw_rates,
        trajectory.forces, trajectory.yaw_moments,
        trajectory.gimbal_angles,
        trajectory.targets,
    ])
    return {
        "dt": trajectory.dt,
        "columns": list(project_io.TRAJECTORY_COLUMNS),
        "rows": rows.tolist(),
    }


def _trajectory_from_payload(doc: dict) -> Trajectory:
    if not isinstance(doc, dict):
        raise project_io.ProjectError(("trajectory", "must be an object"))
    columns = doc.get("columns")
    if columns != list(project_io.TRAJECTORY_COLUMNS):
        raise project_io.ProjectError(
            ("trajectory.columns", "unexpected column layout"))
    rows = np.asarray(doc.get("rows", []), dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2 or rows.shape[1] != len(columns):
        raise project_io.ProjectError(
            ("trajectory.rows", "need a (stages x columns) matrix with at "
                                "least 2 stages"))
    dt = float(doc.get("dt", rows[1, 0] - rows[0, 0]))
    if dt <= 0:
        raise project_io.ProjectError(("trajectory.dt", "must be positive"))
    n = rows.shape[0]
    gimbal_angles = rows[:, 13:15]
    gimbal_rates = np.zeros((n, 2))
    gimbal_rates[:-1] = np.diff(gimbal_angles, axis=0) / dt
    gimbal_rates[-1] = gimbal_rates[-2]
    return Trajectory(
        dt=dt,
        positions=rows[:, 1:4], yaws=rows[:, 4],
        velocities=rows[:, 5:8], yaw_rates=rows[:, 8],
        forces=rows[:, 9:12], yaw_moments=rows[:, 12],
        gimbal_angles=gimbal_angles, gimbal_rates=gimbal_rates,
        targets=rows[:, 15:18],
    )


def _rotation_to_quaternion(rot: np.ndarray) -> list[float]:
    """[w, x, y, z] from a rotation matrix (Shepperd's method)."""
    trace = rot[0, 0] + rot[1, 1] + rot[2, 2]
    if trace > 0:
        s = 2.0 * np.sqrt(1.0 + trace)
        w = 0.25 * s
        x = (rot[2, 1] - rot[1, 2]) / s
        y = (rot[0, 2] - rot[2, 0]) / s
        z = (rot[1, 0] - rot[0, 1]) / s
    elif rot[0, 0] > rot[1, 1] and rot[0, 0] > rot[2, 2]:
        s = 2.0 * np.sqrt(1.0 + rot[0, 0] - rot[1, 1] - rot[2, 2])
        w = (rot[2, 1] - rot[1, 2]) / s
        x = 0.25 * s
        y = (rot[0, 1] + rot[1, 0]) / s
        z = (rot[0, 2] + rot[2, 0]) / s
    elif rot[1, 1] > rot[2, 2]:
        s = 2.0 * np.sqrt(1.0 + rot[1, 1] - rot[0, 0] - rot[2, 2])
        w = (rot[0, 2] - rot[2, 0]) / s
        x = (rot[0, 1] + rot[1, 0]) / s
        y = 0.25 * s
        z = (rot[1, 2] + rot[2, 1]) / s
    else:
        s = 2.0 * np.sqrt(1.0 + rot[2, 2] - rot[0, 0] - rot[1, 1])
        w = (rot[1, 0] - rot[0, 1]) / s
        x = (rot[0, 2] + rot[2, 0]) / s
        y = (rot[1, 2] + rot[2, 1]) / s
        z = 0.25 * s
    return [float(w), float(x), float(y), float(z)]


def _playback_samples(log) -> dict:
    n = log.num_samples
    if n <= _PLAYBACK_LIMIT:
        idx = np.arange(n)
    else:
        idx = np.unique(np.round(
            np.linspace(0, n - 1, _PLAYBACK_LIMIT)).astype(int))
    return {
        "t": log.times[idx].tolist(),
        "position": log.positions[idx].tolist(),
        "velocity": log.velocities[idx].tolist(),
        "yaw": log.yaws()[idx].tolist(),
        "quaternion": [_rotation_to_quaternion(log.rotations[k])
                       for k in idx],
        "position_error": log.position_errors()[idx].tolist(),
        "ref_position": log.ref_positions[idx].tolist(),
    }


def _validation_response(exc: project_io.ProjectError) -> JSONResponse:
    return JSONResponse(status_code=400, content={
        "errors": [{"field": f, "message": m} for f, m in exc.errors],
    })


def create_app(data_dir: Path, frontend_dir: str | Path | None = None,
               max_workers: int = 4) -> FastAPI:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    registry = JobRegistry(max_workers=max_workers)
    app = FastAPI(title="airways", docs_url=None, redoc_url=None)

    @app.post("/api/optimize", status_code=202)
    async def optimize(request: Request):
        body = await request.body()
        try:
            project = project_io.load_project(body)
        except project_io.ProjectError as exc:
            return _validation_response(exc)

        def work(emit):
            def progress(iterate):
                emit({"type": "iteration", "iteration": iterate.iteration,
                      "cost": iterate.cost, "alpha": iterate.alpha,
                      "max_violation": iterate.max_violation})

            result = plan_project(project, progress)
            payload = {
                "trajectory": _trajectory_payload(result.trajectory),
                "iqp_report": result.report.to_dict(),
                "feasibility": result.feasibility.to_dict(),
            }
            if result.report.termination == "stalled":
                raise _JobFailure({"message": "planning stalled",
                                   "diagnostics": payload})
            return payload

        return {"job_id": registry.submit("optimize", work)}

    @app.post("/api/simulate", status_code=202)
    async def simulate(request: Request):
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            return _validation_response(
                project_io.ProjectError(("document", f"invalid JSON: {exc}")))
        try:
            if not isinstance(body, dict):
                raise project_io.ProjectError(("document",
                                               "must be an object"))
            if "platform" not in body:
                raise project_io.ProjectError(("platform",
                                               "required field missing"))
            platform = project_io.platform_from_document(body["platform"])
            gains = project_io.gains_from_document(body.get("gains"),
                                                   platform)
            trajectory = _trajectory_from_payload(body.get("trajectory"))
            dt_sim = float(body.get("dt_sim", 0.002))
            if not 0 < dt_sim <= trajectory.dt:
                raise project_io.ProjectError(
                    ("dt_sim", "must lie in (0, trajectory dt]"))
        except project_io.ProjectError as exc:
            return _validation_response(exc)

        def work(emit):
            try:
                log = simulate_tracking(trajectory, platform, gains,
                                        dt_sim=dt_sim)
            except SimulationDiverged as exc:
                raise _JobFailure({
                    "message": "simulation diverged",
                    "stage": exc.stage,
                    "time": exc.time,
                    "position_error": exc.position_error,
                }) from exc
            emit({"type": "summary", **log.summary()})
            return {"summary": log.summary(),
                    "playback": _playback_samples(log)}

        return {"job_id": registry.submit("simulate", work)}

    @app.get("/api/jobs/{job_id}")
    async def job_status(job_id: str):
        job = registry.get(job_id)
        if job is None:
            return JSONResponse(status_code=404,
                                content={"error": "unknown job"})
        payload = {"id": job.id, "kind": job.kind, "state": job.state,
                   "timings": job.timings()}
        if job.state == "failed":
            payload["error"] = job.error
            return JSONResponse(status_code=422, content=payload)
        if job.state == "done":
            payload["result"] = job.result
        return payload

    @app.get("/api/jobs/{job_id}/events")
    async def job_events(job_id: str):
        job = registry.get(job_id)
        if job is None:
            return JSONResponse(status_code=404,
                                content={"error": "unknown job"})

        def stream():
            for event in registry.follow_events(job):
                yield f"data: {json.dumps(event)}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    def _project_path(name: str) -> Path | None:
        if not _NAME_RE.match(name):
            return None
        return data_dir / f"{name}.json"

    @app.get("/api/projects")
    async def list_projects():
        names = sorted(p.stem for p in data_dir.glob("*.json"))
        return {"projects": names}

    @app.get("/api/projects/{name}")
    async def get_project(name: str):
        path = _project_path(name)
        if path is None:
            return JSONResponse(status_code=409,
                                content={"error": "invalid project name"})
        if not path.exists():
            return JSONResponse(status_code=404,
                                content={"error": "unknown project"})
        return Response(content=path.read_bytes(),
                        media_type="application/json")

    @app.put("/api/projects/{name}")
    async def put_project(name: str, request: Request):
        path = _project_path(name)
        if path is None:
            return JSONResponse(status_code=409,
                                content={"error": "invalid project name"})
        body = await request.body()
        try:
            project_io.load_project(body)
        except project_io.ProjectError as exc:
            return _validation_response(exc)
        path.write_bytes(body)
        return {"stored": name}

    @app.delete("/api/projects/{name}", status_code=204)
    async def delete_project(name: str):
        path = _project_path(name)
        if path is None:
            return JSONResponse(status_code=409,
                                content={"error": "invalid project name"})
        if not path.exists():
            return JSONResponse(status_code=404,
                                content={"error": "unknown project"})
        path.unlink()
        return Response(status_code=204)

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="studio")
    return app
