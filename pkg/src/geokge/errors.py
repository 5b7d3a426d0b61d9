"""Common base for data, config, and file-format errors.

The CLI maps any GeokgeError (and plain OSError) to exit status 2,
reserving 1 for argument-parsing problems.
"""


class GeokgeError(Exception):
    pass
