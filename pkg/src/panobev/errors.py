"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: input/format problems exit 2,
calibration and geometric invariant failures exit 3.
"""


class PanoBevError(Exception):
    exit_code = 1


class InputError(PanoBevError, ValueError):
    exit_code = 2


class FormatError(InputError):
    pass


class LengthError(FormatError):
    pass


class ParseError(FormatError):
    pass


class UnsupportedError(FormatError):
    pass


class DegenerateInputError(InputError):
    pass


class ModeError(InputError):
    pass


class MissingLabelError(InputError):
    pass


class EmptyEvaluationError(InputError):
    pass


class SceneError(InputError):
    pass


class CalibrationError(PanoBevError, ValueError):
    exit_code = 3
