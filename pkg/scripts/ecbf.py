#!/usr/bin/env python3
"""
ECBF manipulator experiments.

Usage:
    python scripts/ecbf.py simulate [scenario.json] [--plot]
    python scripts/ecbf.py grid [--grid config/full_grid.json] [--workers N] [--resume]
    python scripts/ecbf.py guided [--radius 0.2 0.4] [--grid-board output/scoreboard.json]
    python scripts/ecbf.py train --dataset output/dataset.csv
    python scripts/ecbf.py predict --model output/model.json --radius 0.3 [--run]
"""

import os
import sys
import logging
from dotenv import load_dotenv

# Add the project root to the Python path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

# Load environment variables
load_dotenv()

from config.ecbf_config import ECBF_LOG_LEVEL  # noqa: E402
from src.cli.commands import main  # noqa: E402

# Configure logging
logging.basicConfig(
    level=getattr(logging, ECBF_LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

if __name__ == "__main__":
    sys.exit(main())
