"""Exception hierarchy shared by all quatline modules."""


class QuatlineError(Exception):
    """Base class for every error raised by quatline."""


class DomainViolation(QuatlineError):
    """A map was evaluated outside the set where it is defined.

    ``cause`` names the family-specific reason (``"L(x) near zero"``,
    ``"outside disk"``, ...).
    """

    def __init__(self, message, cause=None):
        super().__init__(message)
        self.cause = cause or message


class NearZeroQuaternion(DomainViolation):
    pass


class OutsideDisk(DomainViolation):
    pass


class MobiusPole(DomainViolation):
    pass


class NoIntersection(DomainViolation):
    pass


class TangentDegenerate(DomainViolation):
    pass


class AtProjectionCenter(DomainViolation):
    pass


class NotOnSphere(QuatlineError):
    pass


class StencilOutsideDomain(DomainViolation):
    pass


class TooFewPoints(QuatlineError):
    pass


class CoincidentPoints(QuatlineError):
    pass


class LineCase(QuatlineError):
    """The image of a segment is expected to be straight, not a circle.

    ``collinearity`` holds the line-fit residual of the sampled image when
    the check was carried out.
    """

    def __init__(self, message, collinearity=None):
        super().__init__(message)
        self.collinearity = collinearity


class DegenerateA(QuatlineError):
    pass


class SideMismatch(QuatlineError):
    pass


class RealX(QuatlineError):
    pass
