"""Utility modules for logging and report file handling."""

from .logger import setup_logger, get_logger
from .file_handler import ReportHandler

__all__ = ["setup_logger", "get_logger", "ReportHandler"]
