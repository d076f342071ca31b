"""HTTP scoring service speaking the pair-scoring wire protocol."""

from .app import build_app
from .scoring import CrossEncoderBackend, LexicalBackend, build_backend

__all__ = ["build_app", "build_backend", "CrossEncoderBackend", "LexicalBackend"]
