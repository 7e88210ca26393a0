"""Exceptions raised by hypertree."""


class HypertreeError(Exception):
    """Base class for every error hypertree raises on purpose."""

    stage = None

    def __str__(self):
        """Prefix the message with the stage name when one is known."""
        message = super().__str__()
        if self.stage:
            return f"{self.stage}: {message}"
        return message


class GraphError(HypertreeError):
    """Invalid graph input: disconnected, asymmetric, or empty levels."""

    stage = "graph-core"


class ConfigError(HypertreeError):
    """Invalid experiment configuration."""

    stage = "config"


class FormatError(HypertreeError):
    """Malformed serialized input."""

    stage = "serialize"

    def __init__(self, message, line=None, offset=None):
        """Remember where in the input the problem was found."""
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class InadmissibleEpsilon(HypertreeError):
    """Visual metric parameter with exp(epsilon*delta) - 1 > sqrt(2) - 1."""

    stage = "visual-boundary"

    def __init__(self, epsilon, max_epsilon):
        """Store the rejected value and the largest admissible one."""
        super().__init__(
            f"epsilon {epsilon!r} is not admissible; "
            f"maximal admissible epsilon = ln(sqrt 2)/delta = {max_epsilon!r}"
        )
        self.epsilon = epsilon
        self.max_epsilon = max_epsilon


class SeparationError(HypertreeError):
    """Seed set of a ball cover is not separated by more than the radius."""

    stage = "covering-dimension"

    def __init__(self, pair, distance, radius):
        """Store the offending pair."""
        super().__init__(
            f"seed points {pair[0]} and {pair[1]} are at distance "
            f"{distance!r} <= r = {radius!r}"
        )
        self.pair = pair


class ColorOverflow(HypertreeError):
    """Greedy coloring of a ball cover needs more than 2^kappa + 1 colors."""

    stage = "covering-dimension"

    def __init__(self, center, conflicts, kappa):
        """Store the center that could not be colored and its conflicts."""
        super().__init__(
            f"center {center} conflicts with every color class "
            f"(kappa={kappa}; conflicting centers {list(conflicts)}); "
            "kappa is probably underestimated"
        )
        self.center = center
        self.conflicts = tuple(conflicts)
        self.kappa = kappa


class CoverError(HypertreeError):
    """A family of sets fails to cover what it must cover."""

    stage = "covering-dimension"


class StageError(HypertreeError):
    """Failure of one pipeline stage."""

    def __init__(self, stage, error):
        """Wrap the original error with the failing stage name."""
        super().__init__(Exception.__str__(error))
        self.stage = stage
        self.error = error


class RayError(HypertreeError):
    """Tree completion reached the sphere outside the existing rays."""

    stage = "faithful-spantree"

    def __init__(self, arrivals):
        """Store the sphere vertices that became new first arrivals."""
        super().__init__(
            f"completion created new first arrivals {list(arrivals)}")
        self.arrivals = tuple(arrivals)
