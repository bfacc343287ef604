"""
Scenario Router
Parse and validate configuration text
"""
from fastapi import APIRouter, HTTPException, status

from app.exceptions import SimulationError
from app.schemas import Scenario, ScenarioRequest
from app.services.scenario_service import ScenarioService

router = APIRouter()


@router.post("/parse", response_model=Scenario)
def parse_scenario(request: ScenarioRequest):
    """Validate config text and echo the scenario"""
    try:
        return ScenarioService.parse_scenario(request.config_text)
    except SimulationError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))


@router.post("/serialize")
def serialize_scenario(request: ScenarioRequest):
    """Normalised config text for the given scenario"""
    try:
        scenario = ScenarioService.parse_scenario(request.config_text)
    except SimulationError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    return {"config_text": ScenarioService.serialize_scenario(scenario)}
