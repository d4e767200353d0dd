"""Core configuration for the testbed."""
