"""Pydantic schemas for the testbed domain records."""
