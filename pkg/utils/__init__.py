"""Error types and deterministic file output helpers"""
