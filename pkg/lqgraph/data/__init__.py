"""
Base init for all data accessors
"""

from .data_getters import *
