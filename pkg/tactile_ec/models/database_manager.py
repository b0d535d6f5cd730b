import logging
from typing import List, Optional

from sqlalchemy import inspect, text
from sqlalchemy.orm import Session

from tactile_ec.database import engine, get_db
from tactile_ec.models.models import Base, ExperimentRun, TrialRecord
from tactile_ec.services.experiments import ExperimentOutcome
from tactile_ec.services.metrics import summarize
from tactile_ec.services.results import json_safe

logger = logging.getLogger(__name__)


class DatabaseManager:

    @staticmethod
    def drop_all_tables():
        """Drop all existing tables in the database"""
        try:
            inspector = inspect(engine)
            existing_tables = inspector.get_table_names()

            if existing_tables:
                logger.info(f"Found {len(existing_tables)} existing tables: {existing_tables}")
                Base.metadata.drop_all(bind=engine)
                logger.info("All existing tables dropped successfully")
            else:
                logger.info("No existing tables found")

        except Exception as e:
            logger.error(f"Error dropping tables: {str(e)}")
            raise

    @staticmethod
    def create_all_tables():
        """Create all tables defined in models"""
        try:
            Base.metadata.create_all(bind=engine)
            logger.info("All tables created successfully")
        except Exception as e:
            logger.error(f"Error creating tables: {str(e)}")
            raise

    @staticmethod
    def save_run(outcome: ExperimentOutcome, output_dir: Optional[str] = None, db: Optional[Session] = None) -> int:
        """Persist a run summary and its per-trial metric rows; returns the run id"""
        own_session = db is None
        db = db or next(get_db())
        try:
            scenario = outcome.scenario
            rows = outcome.rows
            summary = summarize(rows).to_dict(orient="records")
            run = ExperimentRun(
                protocol=scenario.protocol,
                object_name=scenario.object,
                variant=scenario.variant,
                mu=scenario.mu,
                trials=scenario.trials,
                seed=scenario.seed,
                failures=sum(1 for t in outcome.trials if t.failure),
                scenario=json_safe(scenario.model_dump()),
                summary=json_safe(summary),
                output_dir=output_dir,
            )
            for row in rows:
                run.records.append(TrialRecord(
                    trial=row.trial,
                    phase=row.phase,
                    failed=row.failure is not None,
                    metrics=json_safe(row.to_dict()),
                ))
            db.add(run)
            db.commit()
            db.refresh(run)
            logger.info(f"Saved run {run.id} ({scenario.protocol}/{scenario.object}) with {len(rows)} rows")
            return run.id

        except Exception as e:
            db.rollback()
            logger.error(f"Error saving run: {str(e)}")
            raise
        finally:
            if own_session:
                db.close()

    @staticmethod
    def list_runs(db: Session, protocol: Optional[str] = None, limit: int = 50) -> List[ExperimentRun]:
        query = db.query(ExperimentRun)
        if protocol:
            query = query.filter(ExperimentRun.protocol == protocol)
        return query.order_by(ExperimentRun.created_at.desc(), ExperimentRun.id.desc()).limit(limit).all()

    @staticmethod
    def get_run(db: Session, run_id: int) -> Optional[ExperimentRun]:
        return db.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()

    @staticmethod
    def get_database_stats():
        """Get current database statistics"""
        db = next(get_db())
        try:
            stats = {}

            inspector = inspect(engine)
            tables = inspector.get_table_names()
            stats["total_tables"] = len(tables)
            stats["table_names"] = tables

            try:
                stats["experiment_runs"] = db.query(ExperimentRun).count()
                stats["trial_records"] = db.query(TrialRecord).count()
            except Exception:
                stats["experiment_runs"] = 0
                stats["trial_records"] = 0

            return stats

        except Exception as e:
            logger.error(f"Error getting database stats: {str(e)}")
            return {"error": str(e)}
        finally:
            db.close()

    @staticmethod
    def reset_database():
        """Complete database reset - drop all tables and recreate"""
        try:
            logger.info("Starting complete database reset...")
            DatabaseManager.drop_all_tables()
            DatabaseManager.create_all_tables()
            logger.info("Database reset completed successfully")
            return {
                "success": True,
                "message": "Database reset completed",
                "stats": DatabaseManager.get_database_stats(),
            }

        except Exception as e:
            logger.error(f"Database reset failed: {str(e)}")
            raise


def verify_database_connection():
    """Verify database connection is working"""
    try:
        with engine.connect() as conn:
            result = conn.execute(text("SELECT 1"))
            return result.fetchone()[0] == 1
    except Exception as e:
        logger.error(f"Database connection failed: {str(e)}")
        return False
