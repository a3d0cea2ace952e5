"""
Command-line interface commands for twostage.

Contains CLI commands for configuring, ingesting, training and reporting.
"""
