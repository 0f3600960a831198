"""File handling infrastructure for poisonwatch."""
