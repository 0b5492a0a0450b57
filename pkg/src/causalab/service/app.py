"""FastAPI wrapper around the experiment runner.

POST /run executes one command and returns the report in both structured
and rendered form; POST /sweep returns a CSV table.  Configuration
problems come back as HTTP 400 with the reason in detail.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..experiments import ConfigError, render_report, run, sweep
from .schemas import ReportModel, RunRequest, RunResponse, SweepRequest, SweepResponse


def create_app() -> FastAPI:
    app = FastAPI(title="causalab", version=__version__)

    @app.post("/run", response_model=RunResponse)
    def run_endpoint(request: RunRequest) -> RunResponse:
        config = {
            "command": request.command,
            **request.params,
        }
        if request.seed is not None:
            config["seed"] = request.seed
        try:
            report = run(config)
            rendered = render_report(report, request.format)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return RunResponse(
            passed=report.passed,
            report=ReportModel(
                command=report.command,
                config=report.config,
                values=report.values,
                checks=report.checks,
            ),
            rendered=rendered,
        )

    @app.post("/sweep", response_model=SweepResponse)
    def sweep_endpoint(request: SweepRequest) -> SweepResponse:
        config = {
            "command": request.command,
            **request.params,
        }
        if request.seed is not None:
            config["seed"] = request.seed
        try:
            table = sweep(config, request.parameter, request.values)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return SweepResponse(csv=table)

    return app
