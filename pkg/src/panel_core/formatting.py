def format_float(value: float) -> str:
    """Shortest text that round-trips to the same float64."""
    value = float(value)
    if value == 0.0:
        return "0.0"
    return repr(value)
