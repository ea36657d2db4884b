# src/utils/__init__.py
"""
Utility modules for HiF-DTA runs: chart generation for training results.
"""

from .chart_generator import TrainingChartGenerator

__all__ = ['TrainingChartGenerator']
