"""Request and response bodies for the experiment service."""

from __future__ import annotations

from pydantic import BaseModel, Field

Scalar = bool | int | float | str


class RunRequest(BaseModel):
    command: str
    seed: int | None = None
    format: str = "jsonl"
    params: dict[str, Scalar] = Field(default_factory=dict)


class ReportModel(BaseModel):
    command: str
    config: dict[str, Scalar | None]
    values: dict[str, Scalar]
    checks: dict[str, bool]


class RunResponse(BaseModel):
    passed: bool
    report: ReportModel
    rendered: str


class SweepRequest(BaseModel):
    command: str
    seed: int | None = None
    params: dict[str, Scalar] = Field(default_factory=dict)
    parameter: str
    values: list[Scalar]


class SweepResponse(BaseModel):
    csv: str
