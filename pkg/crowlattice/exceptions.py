class CrowLatticeException(Exception):
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return "{}: {}".format(type(self).__name__, self.message)


class LatticeSpecException(CrowLatticeException):
    pass


class IncommensurateFluxException(LatticeSpecException):
    """Raised when a torus is requested for a flux that does not quantize on it

    The flux per plaquette must be rational, alpha = p/q, with q dividing nx*ny.

    """

    def __init__(self, alpha, nx, ny):
        self.alpha = alpha
        self.nx = nx
        self.ny = ny
        super().__init__(
            "incommensurate torus flux alpha={} on a {}x{} torus".format(alpha, nx, ny)
        )


class SiteRangeException(CrowLatticeException):
    def __init__(self, x, y, nx, ny):
        self.x = x
        self.y = y
        super().__init__("site ({}, {}) outside the {}x{} lattice".format(x, y, nx, ny))


class LatticeSizeException(CrowLatticeException):
    def __init__(self, dim, limit):
        self.dim = dim
        self.limit = limit
        super().__init__("dimension {} exceeds the dense limit {}".format(dim, limit))


class SingularSystemException(CrowLatticeException):
    """Raised when (omega - H - Sigma) g = e cannot be solved

    `residual` holds the norm of (omega - H - Sigma) g - e for the failed solve
    (infinite when the factorization itself broke down).

    """

    def __init__(self, omega, residual):
        self.omega = omega
        self.residual = residual
        super().__init__("singular system at omega={} (residual {:.3e})".format(omega, residual))


class EigensolverException(CrowLatticeException):
    def __init__(self, message, condition):
        self.condition = condition
        super().__init__("{} (condition number {:.3e})".format(message, condition))


class BandEdgeDivergenceException(CrowLatticeException):
    def __init__(self, k_lambda):
        self.k_lambda = k_lambda
        super().__init__("band-edge divergence at KLambda={}".format(k_lambda))


class EvanescentRegimeException(CrowLatticeException):
    pass


class ConfigException(CrowLatticeException):
    """Raised for invalid experiment configs or command line arguments

    Every schema violation found is listed in `errors`.

    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class RealizationFailedException(CrowLatticeException):
    def __init__(self, index, child_seed, cause):
        self.index = index
        self.child_seed = child_seed
        self.cause = cause
        super().__init__(
            "realization {} (child seed {}) failed: {}".format(index, child_seed, cause)
        )
