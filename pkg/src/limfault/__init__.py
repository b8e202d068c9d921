"""Cycle-level fault injection for logic-in-memory BNN inference on crossbars."""

__version__ = "0.1.0"
