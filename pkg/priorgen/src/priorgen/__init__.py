"""Batch pseudo-HR generation for file-based prior consumption."""

from .job import PriorJob, generate_all
from .models import MODELS, get_model

__all__ = ["PriorJob", "generate_all", "MODELS", "get_model"]
__version__ = "0.1.0"
