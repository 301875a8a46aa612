"""Exception types raised by the solvers."""


class SolverError(RuntimeError):
    """A solver could not produce a valid iterate."""


class StepSizeUnderflow(SolverError):
    """Backtracking exhausted its budget without satisfying the step condition."""

    def __init__(self, iteration, mu):
        self.iteration = iteration
        self.mu = mu
        super().__init__(
            f"line search failed at iteration {iteration}: step size underflowed to {mu:.3e}"
        )


class NonFiniteGradient(SolverError):
    """The gradient field evaluated to inf or nan."""


class DegenerateUserError(ValueError):
    """A user's effective channel gain is zero, so its inverse SINR is undefined."""

    def __init__(self, user, reason="zero effective gain q_l . g_ll"):
        self.user = user
        super().__init__(f"user {user}: {reason}")
