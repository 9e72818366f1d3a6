#!/usr/bin/env python3
"""
__init__.py - Part of equistream
"""

# Test package initialization
