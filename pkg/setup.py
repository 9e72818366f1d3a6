#!/usr/bin/env python3
"""
setup.py - Part of equistream

Setup script for equistream
"""
from setuptools import setup

# Read the requirements file
with open('requirements.txt') as f:
    requirements = [line for line in f.read().splitlines() if line and not line.startswith('#')]

# Read the README file
with open('README.md', 'r') as fh:
    long_description = fh.read()

setup(
    name="equistream",
    version="0.1.0",
    description="Exact and numerical evaluation of infinite utility streams and their social welfare orderings",
    long_description=long_description,
    long_description_content_type="text/markdown",
    py_modules=[
        "stream_core",
        "evaluators",
        "orderings",
        "axiom_harness",
        "monitoring",
        "config",
        "utils",
        "main",
    ],
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "equistream=main:main",
        ],
    },
)
