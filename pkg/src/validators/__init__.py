"""Validators package."""
