"""Scenario configuration, ground truth and the delaying channel."""

from .scenario import ScenarioConfig, load_scenario
from .channel import MeasurementStream, generate_truth, generate_measurements

__all__ = ["ScenarioConfig", "load_scenario", "MeasurementStream", "generate_truth", "generate_measurements"]
