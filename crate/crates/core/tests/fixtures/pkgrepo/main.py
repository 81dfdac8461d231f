from pkg import Engine, VERSION
from pkg.helpers import clamp


def run():
    """Run an engine at full speed."""
    e = Engine()
    e.accelerate(clamp(500, 0, 1000))
    return VERSION
