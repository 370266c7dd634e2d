"""
Exception types raised across the package
"""


class RSFError(Exception):
    """Base class for all errors raised by this package"""


class GraphError(RSFError, ValueError):
    """Invalid graph input: ids, weights, files or generator parameters"""


class LimitError(RSFError, ValueError):
    """Problem size above a configured limit (dense or enumeration)"""


class RejectionLimitError(RSFError, RuntimeError):
    """Rejection sampling exhausted its attempt budget"""


class BracketError(RSFError, RuntimeError):
    """No q bracket reaches the requested tr(K)/n ratio"""
