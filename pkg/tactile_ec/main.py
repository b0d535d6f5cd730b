import logging

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from tactile_ec import __version__
from tactile_ec.api import experiments
from tactile_ec.core.config import settings
from tactile_ec.models.database_manager import DatabaseManager, verify_database_connection

# Set up logging
logging.basicConfig(level=settings.LOG_LEVEL)
logger = logging.getLogger(__name__)

app = FastAPI(
    title=settings.APP_NAME,
    description="Tactile extrinsic-contact estimation and control experiments",
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(experiments.router, prefix="/experiments", tags=["Experiments"])


@app.get("/", tags=["System"])
def root():
    return {"message": f"{settings.APP_NAME} API", "version": __version__, "status": "active"}


@app.get("/health", tags=["System"])
def health_check():
    db_status = verify_database_connection()

    return {
        "status": "healthy" if db_status else "unhealthy",
        "database_connected": db_status,
        "version": __version__,
    }


@app.get("/db-stats", tags=["Database Management"])
def get_database_stats_endpoint():
    """Get current database statistics and table information"""
    try:
        return {"database_stats": DatabaseManager.get_database_stats()}

    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to get database stats: {str(e)}")


@app.on_event("startup")
async def startup_event():
    """Make sure the result tables exist"""
    DatabaseManager.create_all_tables()
