import os
from dotenv import load_dotenv

load_dotenv()

THREADS = int(os.environ.get("METIVIER_LAB_THREADS", "1"))
SEED = int(os.environ["METIVIER_LAB_SEED"]) if os.environ.get("METIVIER_LAB_SEED") else None
CLUSTER_REL_TOL = float(os.environ.get("METIVIER_LAB_CLUSTER_REL_TOL", "1e-6"))
JACOBI_TOL = float(os.environ.get("METIVIER_LAB_JACOBI_TOL", "1e-14"))
JACOBI_MAX_SWEEPS = int(os.environ.get("METIVIER_LAB_JACOBI_MAX_SWEEPS", "30"))
QUAD_MAX_ERROR = float(os.environ.get("METIVIER_LAB_QUAD_MAX_ERROR", "1e-4"))
OUT_DIR = os.environ.get("METIVIER_LAB_OUT_DIR")
LOG_LEVEL = os.environ.get("METIVIER_LAB_LOG_LEVEL", "INFO").upper()
