from datetime import datetime

from sqlalchemy import JSON, Boolean, Column, DateTime, Float, ForeignKey, Index, Integer, String, Text
from sqlalchemy.orm import relationship

from tactile_ec.database import Base


class ExperimentRun(Base):
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, index=True)
    protocol = Column(String, index=True)
    object_name = Column(String, index=True)
    variant = Column(String, index=True)
    mu = Column(Float)
    trials = Column(Integer)
    seed = Column(Integer)
    failures = Column(Integer, default=0)
    scenario = Column(JSON)
    summary = Column(JSON)
    output_dir = Column(Text)
    created_at = Column(DateTime, default=datetime.utcnow, index=True)

    records = relationship("TrialRecord", back_populates="run", cascade="all, delete-orphan",
                           order_by="TrialRecord.id")

    __table_args__ = (
        Index('idx_run_protocol_object', 'protocol', 'object_name'),
    )


class TrialRecord(Base):
    __tablename__ = "trial_records"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("experiment_runs.id"), index=True)
    trial = Column(Integer)
    phase = Column(String, index=True)
    failed = Column(Boolean, default=False, index=True)
    metrics = Column(JSON)

    run = relationship("ExperimentRun", back_populates="records")

    __table_args__ = (
        Index('idx_record_run_trial', 'run_id', 'trial'),
    )
