from strings import slugify as make_slug, normalize
import strings as st
import json


def title_slug(title):
    """Build a slug for a post title."""
    return make_slug(title)


def clean_all(items):
    """Normalize every item."""
    return [normalize(i) for i in items]


def module_slug(title):
    """Slug through the module alias using the default separator."""
    return st.slugify(title, st.DEFAULT_SEP)


def wrap(title):
    """Wrap a title into a Slug object."""
    return st.Slug(title)


def dump(data):
    """Serialize data as json."""
    return json.dumps(data)


def shadowed(normalize):
    """Parameter shadows the imported helper."""
    return normalize("x")


def unaliased_name(title):
    """Uses the original name, which is not bound in this module."""
    return slugify(title)


def slug_and_clean(title, items):
    """Combine title_slug and clean_all."""
    return title_slug(title), clean_all(items)
