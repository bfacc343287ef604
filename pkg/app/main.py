from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.config import configure_logging
from app.routers import runs, scenarios

configure_logging()

app = FastAPI(
    title="Pseudo-Hermitian Invariant API",
    description="Exact solutions of the non-Hermitian time-dependent oscillator, verified by operator algebra and grid propagation",
    version=__version__
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(scenarios.router, prefix="/api/v1/scenarios", tags=["Scenarios"])
app.include_router(runs.router, prefix="/api/v1/runs", tags=["Runs"])


@app.get("/")
async def root():
    return {
        "message": "Pseudo-Hermitian Invariant API",
        "version": __version__,
        "docs": "/docs"
    }


@app.get("/health")
async def health():
    return {"status": "healthy"}
