"""
Tests for the artifact builders package.

This package contains tests for the builder framework, the factory and the
metrics, results and trajectory writers.
"""
