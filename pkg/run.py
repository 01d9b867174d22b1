#!/usr/bin/env python3
"""
Simple runner script for the imaging simulator.
Usage: python run.py run experiment.json
"""

from ecc_imaging.main import app

if __name__ == "__main__":
    app()
