#!/usr/bin/env python3
"""
co-BPM command-line launcher

Usage:
    python cobpm.py estimate --x x.csv --y y.csv --phi tv,hellinger,kl,renyi:2
    python cobpm.py estimate --setup beta-1d --n 1250 --chains 4 --threads 4
    python cobpm.py oracle --setup beta-mixture-3d --mc-draws 10000000 --workers 4
    python cobpm.py baseline --setup skewed-mixture-10d --n 200
    python cobpm.py sanity --setup sanity-piecewise
    python cobpm.py sweep --setup beta-mixture-3d --sizes 50,250,1250 --estimators cobpm,pc1,pc10
"""
import sys
from pathlib import Path

# Load environment variables from .env file
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

# Add the project root to the Python path
sys.path.append(str(Path(__file__).parent))

from src.cli.main import main


if __name__ == "__main__":
    sys.exit(main())
