"""Application infrastructure: database and logging."""
