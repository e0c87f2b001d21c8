"""Session calculus with checkpoint-based rollback: terms, types, checkers,
and a simulator for binary and multiparty sessions."""

from pathlib import Path

__version__ = "0.1.0"


def corpus_dir() -> Path:
    """Directory of the bundled example programs and types."""
    return Path(__file__).resolve().parent / "corpus"
