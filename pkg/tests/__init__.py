"""Tests for twostage."""
