# File: ier.py

"""
Command-line launcher for the image edit request parser.

Usage: python ier.py <subcommand> [options]   (see `python ier.py --help`)
"""
import os
import sys

# --- Setup Project Root Path ---
PROJECT_ROOT = os.path.abspath(os.path.dirname(__file__))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from src.cli import run

if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
