"""
Errors raised by the models. Each one subclasses the builtin that callers
already catch, so `except ValueError` keeps working around the pipeline.
"""


class DecodeError(ValueError):
    """ The byte stream is not a decodable PNG or JPEG image. """


class FormatError(ValueError):
    """ The image decoded but its channel layout is unsupported. """


class PreconditionError(ValueError):
    """ An operation was called with arguments outside its domain. """


class BoundsError(PreconditionError):
    """ A box or placement falls outside its host image or grid. """


class ParameterError(ValueError):
    """ Model parameters violate an invariant (e.g. non-concave deformation). """


class EmptyPyramidError(ValueError):
    """ Every pyramid level was too small for the requested filters. """


class FontError(ValueError):
    """ The plate font has no glyph for a requested character. """


class ModelFileError(ValueError):
    """ A model file has a bad magic header, version or truncated body. """


class MissingClassError(KeyError):
    def __init__(self, label):
        super().__init__(label)
        self.label = label

    def __str__(self):
        return f"no positive training sample for class '{self.label}'"


class KeyingError(KeyError):
    """ Predictions and ground truth are not keyed by the same image ids. """


class RecordLookupError(KeyError):
    """ The annotation file has no record for the requested image id. """


class TrainingDivergenceError(RuntimeError):
    """ The hinge loss became NaN or infinite during training. """
