"""
Run Router
Solve and verify scenarios over HTTP
"""
import tempfile
from pathlib import Path

from fastapi import APIRouter, Depends, HTTPException, status

from app.config import Settings, get_settings
from app.exceptions import SimulationError
from app.schemas import RunRequest, RunResponse, Scenario
from app.services.run_service import RunService
from app.services.scenario_service import ScenarioService

router = APIRouter()


def _scenario(request: RunRequest, settings: Settings) -> Scenario:
    try:
        scenario = ScenarioService.parse_scenario(request.config_text, flip_lambda=request.flip_lambda)
    except SimulationError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    if scenario.n_steps > settings.api_max_steps:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=f"steps={scenario.n_steps} exceeds the API limit of {settings.api_max_steps}",
        )
    return scenario


@router.post("/solve", response_model=RunResponse)
def solve(request: RunRequest, settings: Settings = Depends(get_settings)):
    """Solve a scenario and write its artifacts"""
    scenario = _scenario(request, settings)
    if request.out_dir:
        out_dir = request.out_dir
    else:
        Path(settings.out_dir).mkdir(parents=True, exist_ok=True)
        out_dir = tempfile.mkdtemp(prefix="solve-", dir=settings.out_dir)
    try:
        report = RunService.solve(scenario, out_dir)
    except SimulationError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=f"{e.stage}: {e}")
    return RunResponse(passed=report.passed, report=report)


@router.post("/verify", response_model=RunResponse)
def verify(request: RunRequest, settings: Settings = Depends(get_settings)):
    """Run the verification suite; artifacts are written only when out_dir is given"""
    scenario = _scenario(request, settings)
    try:
        report = RunService.verify(scenario, request.out_dir)
    except SimulationError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=f"{e.stage}: {e}")
    return RunResponse(passed=report.passed, report=report)
