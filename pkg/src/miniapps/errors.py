class ConfigError(ValueError):
    """Invalid run configuration (bad sizes, indivisible partitions, ...)."""
