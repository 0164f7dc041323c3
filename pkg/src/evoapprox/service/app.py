"""HTTP service exposing search jobs, certification, testing, and timing.

Search runs as background jobs, one broker each; the broker endpoints mirror
the exchange-server role it plays for in-process workers, so remote workers
could participate through the same put/sample surface.  Everything else is a
stateless wrapper over the core package.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from .. import __version__, bench, certify
from ..baselines import BaselineSpec, build_baseline
from ..config import ExperimentConfig
from ..evaluation import precision_report
from ..export import front_csv, front_json
from ..graphs import ArithmeticMode, count_operations, parse, serialize
from ..search import Broker, SearchResult, run_worker_pool
from ..targets import get_target
from . import schemas as s


@dataclass(eq=False)
class SearchJob:
    job_id: str
    config: ExperimentConfig
    seed: int
    broker: Broker
    stop_event: threading.Event = field(default_factory=threading.Event)
    state: str = "running"
    error: str | None = None
    result: SearchResult | None = None
    thread: threading.Thread | None = None

    def run(self) -> None:
        try:
            self.result = run_worker_pool(
                self.config.search_config(self.seed),
                stop_condition=lambda _b: self.stop_event.is_set(),
                broker=self.broker)
            self.state = "stopped" if self.stop_event.is_set() else "done"
        except Exception as exc:  # surfaced through the status endpoint
            self.state = "failed"
            self.error = f"{type(exc).__name__}: {exc}"

    def status(self) -> s.JobStatus:
        return s.JobStatus(job_id=self.job_id, state=self.state, seed=self.seed,
                           evaluations=self.broker.evaluations,
                           budget=self.config.search.budget,
                           archive_size=len(self.broker.archive_records()),
                           config_hash=self.config.config_hash(), error=self.error)


class JobManager:
    def __init__(self):
        self._jobs: dict[str, SearchJob] = {}
        self._lock = threading.Lock()

    def start(self, config: ExperimentConfig, seed: int) -> SearchJob:
        job = SearchJob(job_id=uuid.uuid4().hex[:12], config=config, seed=seed,
                        broker=Broker(capacity=config.search.buffer_capacity, seed=seed))
        job.thread = threading.Thread(target=job.run, name=f"search-job-{job.job_id}",
                                      daemon=True)
        with self._lock:
            self._jobs[job.job_id] = job
        job.thread.start()
        return job

    def get(self, job_id: str) -> SearchJob:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no job {job_id!r}")
        return job


def _parse_program(body: s.ProgramBody):
    try:
        graph = parse(body.program)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"bad program: {exc}") from exc
    coeffs = body.coefficients
    k = len(graph.free_coefficients)
    if coeffs is None and k > 0:
        raise HTTPException(status_code=400,
                            detail=f"program has {k} free coefficients but none were given")
    if coeffs is not None and len(coeffs) != k:
        raise HTTPException(status_code=400,
                            detail=f"program has {k} free coefficients, got {len(coeffs)}")
    return graph, coeffs


def create_app() -> FastAPI:
    app = FastAPI(title="evoapprox", version=__version__)
    jobs = JobManager()
    app.state.jobs = jobs

    @app.get("/health", response_model=s.HealthResponse)
    def health():
        return s.HealthResponse(status="ok", version=__version__)

    @app.post("/certify", response_model=s.CertifyResponse)
    def certify_program(req: s.CertifyRequest):
        graph, coeffs = _parse_program(req)
        try:
            target = get_target(req.target)
            limits = certify.ProofLimits(max_depth=req.max_depth, max_leaves=req.max_leaves)
            lo, hi = req.domain if req.domain is not None else target.domain
            result = certify.prove_bound(graph, coeffs, target, lo, hi, req.epsilon, limits)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        cert = None
        if req.include_certificate and result.proven:
            cert = certify.to_certificate(result, graph, coeffs)
        return s.CertifyResponse(status=result.status, target=result.target,
                                 epsilon=req.epsilon, domain=result.domain,
                                 subintervals=result.subintervals,
                                 max_depth_reached=result.max_depth_reached,
                                 witness=result.witness, certificate=cert)

    @app.post("/certificates/check", response_model=s.CheckCertificateResponse)
    def check_cert(req: s.CheckCertificateRequest):
        try:
            result = certify.check_certificate(req.certificate)
        except certify.CertificateError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return s.CheckCertificateResponse(status=result.status,
                                          subintervals=result.subintervals,
                                          target=result.target, epsilon=result.epsilon)

    @app.post("/test", response_model=s.PrecisionReport)
    def test_program(req: s.TestRequest):
        graph, coeffs = _parse_program(req)
        try:
            target = get_target(req.target)
            report = precision_report(graph, coeffs, target, ArithmeticMode(req.mode),
                                      grid_size=req.grid_size, exhaustive=req.exhaustive)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return s.PrecisionReport(**report)

    @app.post("/baselines", response_model=s.BaselineResponse)
    def baseline(req: s.BaselineRequest):
        try:
            target = get_target(req.target)
            spec = BaselineSpec(family=req.family, order=req.order, center=req.center,
                                interval=req.interval, coeff_file=req.coeff_file)
            graph = build_baseline(target, spec)
            report = precision_report(graph, None, target, ArithmeticMode.REAL64,
                                      grid_size=req.grid_size)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return s.BaselineResponse(family=req.family, order=req.order,
                                  program=serialize(graph),
                                  operations=count_operations(graph),
                                  report=s.PrecisionReport(**report))

    @app.post("/bench")
    def bench_program(req: s.BenchRequest) -> dict:
        graph, coeffs = _parse_program(req)
        cfg = req.config.build() if req.config is not None else bench.BenchConfig.reduced()
        try:
            return bench.benchmark_report(graph, coeffs, cfg)
        except bench.BenchmarkIntegrityError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.post("/compare", response_model=s.CompareResponse)
    def compare(req: s.CompareRequest):
        a = _parse_program(req.a)
        b = _parse_program(req.b)
        cfg = req.config.build() if req.config is not None else bench.BenchConfig.reduced()
        try:
            stats = bench.compare_interleaved(a, b, cfg, ratios=req.ratios)
        except bench.BenchmarkIntegrityError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return s.CompareResponse(**stats)

    @app.post("/search/jobs", response_model=s.JobStatus)
    def start_search(req: s.SearchStartRequest):
        seed = req.seed if req.seed is not None else req.config.seeds[0]
        try:
            req.config.search_config(seed)  # validate before spawning the thread
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return jobs.start(req.config, seed).status()

    @app.get("/search/jobs/{job_id}", response_model=s.JobStatus)
    def job_status(job_id: str):
        return jobs.get(job_id).status()

    @app.post("/search/jobs/{job_id}/stop", response_model=s.JobStatus)
    def stop_job(job_id: str):
        job = jobs.get(job_id)
        job.stop_event.set()
        if job.thread is not None:
            job.thread.join(timeout=60.0)
        return job.status()

    @app.get("/search/jobs/{job_id}/archive", response_model=s.ArchiveResponse)
    def job_archive(job_id: str):
        job = jobs.get(job_id)
        return s.ArchiveResponse(job_id=job_id, records=job.broker.archive_records())

    @app.get("/search/jobs/{job_id}/front")
    def job_front(job_id: str, format: str = "json"):
        job = jobs.get(job_id)
        records = job.broker.archive_records()
        if format == "csv":
            return PlainTextResponse(front_csv(records), media_type="text/csv")
        if format == "json":
            return front_json(records, job.config.stamp())
        raise HTTPException(status_code=400, detail=f"unknown format {format!r}")

    @app.post("/search/jobs/{job_id}/programs")
    def put_record(job_id: str, req: s.PutRecordRequest) -> dict:
        job = jobs.get(job_id)
        try:
            job.broker.put(req.record, count=req.count)
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"bad record: {exc}") from exc
        return {"evaluations": job.broker.evaluations}

    @app.get("/search/jobs/{job_id}/sample", response_model=s.SampleResponse)
    def sample(job_id: str, count: int = 1):
        if count < 1:
            raise HTTPException(status_code=400, detail="count must be >= 1")
        job = jobs.get(job_id)
        return s.SampleResponse(records=job.broker.sample(count))

    return app


app = create_app()
