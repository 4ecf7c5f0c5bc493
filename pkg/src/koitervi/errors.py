"""Error hierarchy. Every error carries a short ``category`` used by the CLI."""


class KoiterviError(Exception):
    category = "error"


class ArgumentError(KoiterviError, ValueError):
    category = "argument"


class DomainError(KoiterviError, ValueError):
    category = "domain"


class ImmersionError(KoiterviError):
    category = "immersion"


class NonEllipticError(KoiterviError):
    category = "non-elliptic"


class ContractError(KoiterviError):
    category = "contract"


class InfeasibleGapError(KoiterviError, ValueError):
    category = "infeasible-gap"


class NonConvergenceError(KoiterviError):
    category = "non-convergence"

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class DegenerateKornError(KoiterviError):
    category = "degenerate-korn"

    def __init__(self, message, lambda_min=None, witness=None):
        super().__init__(message)
        self.lambda_min = lambda_min
        self.witness = witness


class PreconditionError(KoiterviError):
    category = "precondition"


class ConvexifierSearchError(KoiterviError):
    category = "search-failure"

    def __init__(self, message, M=None, T=None):
        super().__init__(message)
        self.M = M
        self.T = T


class ConfigError(KoiterviError):
    category = "config"

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
