import logging
from typing import Any, Dict, List, Optional

from fastapi import APIRouter, Depends, HTTPException
from pydantic import BaseModel, Field
from sqlalchemy.orm import Session

from tactile_ec.core.config import load_scenario
from tactile_ec.core.exceptions import IllegalTransitionError, InvalidConfigError, TactileECError
from tactile_ec.database import get_db
from tactile_ec.models.database_manager import DatabaseManager
from tactile_ec.services.experiments import run_experiment
from tactile_ec.services.metrics import summarize
from tactile_ec.services.results import json_safe

logger = logging.getLogger(__name__)

router = APIRouter()


class ExperimentRequest(BaseModel):
    object: str = "rectangle"
    mu: float = 0.5
    variant: str = "proposed"
    trials: int = Field(default=1, ge=1, le=20)
    seed: int = 0
    overrides: Dict[str, Any] = {}


class RunSummary(BaseModel):
    id: int
    protocol: str
    object_name: str
    variant: str
    mu: float
    trials: int
    seed: int
    failures: int


class RunDetail(RunSummary):
    scenario: Dict[str, Any]
    summary: List[Dict[str, Any]]
    records: List[Dict[str, Any]]


def _summary(run) -> RunSummary:
    return RunSummary(id=run.id, protocol=run.protocol, object_name=run.object_name, variant=run.variant,
                      mu=run.mu, trials=run.trials, seed=run.seed, failures=run.failures or 0)


def _run(protocol: str, request: ExperimentRequest, db: Session) -> dict:
    try:
        scenario = load_scenario(None, **{
            **request.overrides,
            "object": request.object,
            "mu": request.mu,
            "variant": request.variant,
            "trials": request.trials,
            "seed": request.seed,
            "protocol": protocol,
        })
        outcome = run_experiment(scenario, workers=1)
        run_id = DatabaseManager.save_run(outcome, db=db)
    except (InvalidConfigError, IllegalTransitionError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except TactileECError as e:
        logger.error(f"Experiment {protocol} failed: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))

    response = {
        "run_id": run_id,
        "protocol": protocol,
        "failures": sum(1 for t in outcome.trials if t.failure),
        "summary": json_safe(summarize(outcome.rows).to_dict(orient="records")),
    }
    if outcome.table is not None:
        response["misalignment"] = json_safe(outcome.table.to_dict(orient="records"))
    return response


@router.post("/point")
def run_point(request: ExperimentRequest, db: Session = Depends(get_db)):
    return _run("point", request, db)


@router.post("/multi")
def run_multi(request: ExperimentRequest, db: Session = Depends(get_db)):
    return _run("multi", request, db)


@router.post("/force-eval")
def run_force_eval(request: ExperimentRequest, db: Session = Depends(get_db)):
    return _run("force-eval", request, db)


@router.get("", response_model=List[RunSummary])
def list_runs(protocol: Optional[str] = None, limit: int = 50, db: Session = Depends(get_db)):
    return [_summary(run) for run in DatabaseManager.list_runs(db, protocol, limit)]


@router.get("/{run_id}", response_model=RunDetail)
def get_run(run_id: int, db: Session = Depends(get_db)):
    run = DatabaseManager.get_run(db, run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")
    return RunDetail(
        **_summary(run).model_dump(),
        scenario=run.scenario or {},
        summary=run.summary or [],
        records=[{"trial": r.trial, "phase": r.phase, "failed": r.failed, **(r.metrics or {})} for r in run.records],
    )
