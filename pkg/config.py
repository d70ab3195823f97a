#!/usr/bin/env python3
"""
Configuration for the hub placement tools
Optimization defaults live here as constants; the environment (.env) only
points the run archive and report server somewhere else.
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

TOOL_VERSION = "1.0.0"

# ===== OPTIMIZATION DEFAULTS =====
DEFAULT_MAX_ITER = 10
DEFAULT_CUTOFF_M = 10.0
DEFAULT_GRID_RES_M = 1000.0
DEFAULT_MAX_SNAP_M = 2000.0  # twice the grid resolution
DEFAULT_SNAP_POLICY = "strict"
DEFAULT_EXCLUDED_CLASSES = ("motorway", "metro")
DEFAULT_ALPHA = 1.0
DEFAULT_NORM = "max"
DEFAULT_CELL_SIZE_M = 1000.0
DEFAULT_EXACT_CAP = 200_000

SNAP_POLICIES = ("strict", "lenient")
NORM_SCHEMES = ("max", "sum")

# ===== ARCHIVE / SERVER =====
RUNS_DIR = os.getenv("HUBPLACE_RUNS_DIR", "runs_db")
SERVER_HOST = os.getenv("HUBPLACE_HOST", "127.0.0.1")
SERVER_PORT = int(os.getenv("HUBPLACE_PORT", "7864"))
