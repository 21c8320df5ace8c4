"""Domain models and the hstar_fits table."""
