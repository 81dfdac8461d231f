from dataclasses import dataclass

WIDTH, HEIGHT = 640, 480
DEFAULT_NAME: str = "shape"
registry = {}


def register(cls):
    """Class decorator that records cls in the registry."""
    registry[cls.__name__] = cls
    return cls


class Shape:
    """Base shape."""

    def area(self) -> float:
        """Return the area."""
        return 0.0

    def describe(self):
        """Describe with area."""
        return "%s: %f" % (DEFAULT_NAME, self.area())


@register
class Rect(Shape):
    """Axis-aligned rectangle."""

    def __init__(self, w, h):
        self.w = w
        self.h = h

    def area(self) -> float:
        return self.w * self.h

    @staticmethod
    def full_screen():
        """A rectangle covering the screen."""
        return Rect(WIDTH, HEIGHT)
