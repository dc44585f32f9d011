"""Experiment harness: configuration, sweeps, pinned histogram recipes and record export."""
