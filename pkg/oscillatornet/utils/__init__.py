"""Initialization file for utils package."""
