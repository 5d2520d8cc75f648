from .base import Task
from .colors import ColorsTask, generate_colors
from .corners import ToyCornersTask, generate_toy_corners
from .decoy import DecoyData, DecoyTask, generate_decoy, quantize_grayscale, read_idx
from .text import (TextData, TextTask, build_text_task, load_text,
                   synthetic_text_task, tokenize, write_corpus)

__all__ = [
    "Task",
    "ColorsTask", "generate_colors",
    "ToyCornersTask", "generate_toy_corners",
    "DecoyData", "DecoyTask", "generate_decoy", "quantize_grayscale", "read_idx",
    "TextData", "TextTask", "build_text_task", "load_text",
    "synthetic_text_task", "tokenize", "write_corpus",
]
