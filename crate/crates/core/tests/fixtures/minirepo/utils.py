MAX_LEN = 10


def is_full_string(s):
    """Check whether s is a non-empty string."""
    return isinstance(s, str) and s.strip() != ""


class Formatter:
    """Formats identifiers."""

    def camel(self, s):
        """Convert snake case s to camel case."""
        parts = s.split("_")
        return parts[0] + "".join(p.title() for p in parts[1:])
