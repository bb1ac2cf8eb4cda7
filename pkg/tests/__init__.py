"""Testing infrastructure for anakit."""
