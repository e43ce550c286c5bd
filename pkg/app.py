"""
MTS Domain Adaptation Main Entry Point
Run this script with a command: generate, train, eval, ablate, plot or benchmark
"""

import sys

from mts import create_app

app = create_app()

if __name__ == '__main__':
    sys.exit(app.run(sys.argv[1:]))
