"""Builtin experiment configs (TOML), loaded by ``rgsp.experiments.builtin_scenarios``."""
