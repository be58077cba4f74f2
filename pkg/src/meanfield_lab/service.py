"""HTTP service exposing the verification suites and the convergence scan.

Suite runs are synchronous: a request blocks until the suite finishes and
returns the full report. The CLI drives this app in-process by default, so
no server has to be running for command-line use; `meanfield-lab serve`
publishes the same app over uvicorn for shared lab use.
"""

from __future__ import annotations

from typing import List, Optional, Union

import numpy as np
from fastapi import FastAPI
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .experiments import ConvergeConfig
from .metrics import CSV_COLUMNS
from .suites import (
    run_algebra_suite,
    run_classical_suite,
    run_converge_suite,
    run_egorov_suite,
    run_phasespace_suite,
)

__all__ = ["app", "create_app"]


# ---------------------------------------------------------------------------
# request / response models
# ---------------------------------------------------------------------------


class GridModel(BaseModel):
    d: int = 1
    M: int = 16
    L: float = 2.0 * np.pi


class PotentialModel(BaseModel):
    coeffs: List[float] = Field(default=[0.0, 0.5])


class InitialModel(BaseModel):
    kind: str = "gaussian"
    width: float = 0.5
    center: List[float] = Field(default=[np.pi])


class TimeModel(BaseModel):
    T: float = 1.0
    dt: float = 0.0025


class ScanModel(BaseModel):
    N: List[int] = Field(default=[2, 3, 4, 5])
    hbar: List[float] = Field(default=[1.0, 0.5, 0.25])


class DualNormModel(BaseModel):
    order: int = 6
    alpha_max: int = 4
    beta_max: int = 4


class ConvergeRequest(BaseModel):
    grid: GridModel = GridModel()
    potential: PotentialModel = PotentialModel()
    initial: InitialModel = InitialModel()
    time: TimeModel = TimeModel()
    scan: ScanModel = ScanModel()
    dual_norm: DualNormModel = DualNormModel()
    seed: int = 7
    timing: bool = True
    workers: int = 1


class SeedRequest(BaseModel):
    seed: int = 7


class PhasespaceRequest(BaseModel):
    seed: int = 7
    M: int = 64


class ClassicalRequest(BaseModel):
    seed: int = 7
    mc_samples: int = 10000
    mc_N: int = 8


class EgorovRequest(BaseModel):
    seed: int = 7
    M: int = 64
    dt: float = 1.0 / 8192.0
    hbars: List[float] = Field(default=[0.4, 0.2, 0.1, 0.05])


class CheckModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    check: str
    value: Union[float, List[float], dict, str]
    tolerance: Union[float, List[float], str]
    mode: str = "max"
    passed: bool = Field(alias="pass")


class SuiteReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    suite: str
    checks: List[CheckModel]
    passed: bool = Field(alias="pass")
    n_checks: int
    runtime_s: Optional[float] = None
    config: Optional[dict] = None
    table: Optional[List[dict]] = None  # egorov: per-(hbar, omega) scan rows
    slopes: Optional[dict] = None  # egorov: fitted defect slopes


class RecordModel(BaseModel):
    N: int
    hbar: float
    t: float
    M: int
    dt: float
    error: float
    argmax_alpha: int
    argmax_beta: int
    wall_ms: float
    saturation: dict = Field(default_factory=dict)


class ConvergeReport(SuiteReport):
    records: List[RecordModel] = Field(default_factory=list)
    content_hash: str = ""
    csv_columns: List[str] = Field(default_factory=lambda: list(CSV_COLUMNS))


class HealthModel(BaseModel):
    status: str
    version: str


# ---------------------------------------------------------------------------
# app
# ---------------------------------------------------------------------------


def _suite_response(report):
    return SuiteReport.model_validate(report)


def create_app():
    app = FastAPI(
        title="meanfield-lab",
        version=__version__,
        description=(
            "Verification suites for semiclassical mean-field dynamics: "
            "phase-space calculus, empirical-measure algebra, classical "
            "transport, observable propagation, and the N-scaling "
            "convergence experiment."
        ),
    )

    @app.get("/health", response_model=HealthModel)
    def health():
        return HealthModel(status="ok", version=__version__)

    @app.post("/suites/phasespace", response_model=SuiteReport)
    def phasespace_suite(req: PhasespaceRequest):
        return _suite_response(run_phasespace_suite(seed=req.seed, M=req.M))

    @app.post("/suites/algebra", response_model=SuiteReport)
    def algebra_suite(req: SeedRequest):
        return _suite_response(run_algebra_suite(seed=req.seed))

    @app.post("/suites/classical", response_model=SuiteReport)
    def classical_suite(req: ClassicalRequest):
        return _suite_response(
            run_classical_suite(
                seed=req.seed, mc_samples=req.mc_samples, mc_N=req.mc_N
            )
        )

    @app.post("/suites/egorov", response_model=SuiteReport)
    def egorov_suite(req: EgorovRequest):
        return _suite_response(
            run_egorov_suite(
                seed=req.seed, M=req.M, dt=req.dt, hbars=tuple(req.hbars)
            )
        )

    @app.post("/experiments/converge", response_model=ConvergeReport)
    def converge(req: ConvergeRequest):
        cfg = ConvergeConfig.from_dict(req.model_dump(exclude={"workers"}))
        report = run_converge_suite(cfg, workers=req.workers)
        records = [
            RecordModel(
                N=r.N,
                hbar=r.hbar,
                t=r.t,
                M=r.M,
                dt=r.dt,
                error=r.error,
                argmax_alpha=r.argmax_alpha,
                argmax_beta=r.argmax_beta,
                wall_ms=r.wall_ms,
                saturation={str(k): v for k, v in r.extra.get("saturation", {}).items()},
            )
            for r in report["records"]
        ]
        return ConvergeReport(
            suite=report["suite"],
            checks=[CheckModel.model_validate(c) for c in report["checks"]],
            **{"pass": report["pass"]},
            n_checks=report["n_checks"],
            runtime_s=report.get("runtime_s"),
            config=report.get("config"),
            records=records,
            content_hash=report["content_hash"],
        )

    return app


app = create_app()
