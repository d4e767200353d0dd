"""Testbed services: plant simulation, attacks, features, models, evaluation, mesh."""
