from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from tactile_ec.core.config import settings

if settings.DATABASE_URL.startswith("sqlite"):
    # trials run on worker threads
    connect_args = {"check_same_thread": False}
else:
    connect_args = {"connect_timeout": 10, "application_name": "tactile_ec"}

engine = create_engine(
    settings.DATABASE_URL,
    pool_pre_ping=True,
    echo=False,
    connect_args=connect_args,
)

SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
Base = declarative_base()


def get_db():
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
