"""Benchmark harness: configs, pipeline stages and the command-line interface."""
