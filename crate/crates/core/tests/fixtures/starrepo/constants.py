RATE = 0.2
THRESHOLD = 5
NAMES = ["a", "b"]
_PRIVATE = 1


def scale(x):
    """Scale x by RATE."""
    return x * RATE
