__all__ = [
    "BelowX0Error",
    "DomainError",
    "IndeterminateError",
    "InfeasibleError",
    "InfeasibleStartError",
    "InputError",
    "NoConsistentPriceSystemError",
    "TcdlError",
    "TreeError",
    "UnboundedError",
]


class TcdlError(Exception):
    pass


class InputError(TcdlError, ValueError):
    "Raised when a tree, market, payoff or config violates its invariants."


class TreeError(InputError):
    pass


class DomainError(InputError):
    "Raised when a utility function is evaluated outside of its domain."


class NoConsistentPriceSystemError(InputError):
    "Raised when the consistent-price-system polytope is empty (arbitrage)."


class InfeasibleStartError(InputError):
    "Raised when no strictly feasible point exists for a barrier solve."


class InfeasibleError(TcdlError):
    pass


class UnboundedError(TcdlError):
    pass


class IndeterminateError(TcdlError, ArithmeticError):
    "Raised when a solver stalls and cannot certify its answer."


class BelowX0Error(TcdlError, ValueError):
    "Raised when the initial capital does not exceed x0."
