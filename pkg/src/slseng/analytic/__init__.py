"""Closed-form and quadrature performance expressions."""
from .params import *  # noqa: F401,F403
from .access import *  # noqa: F401,F403
from .primary import *  # noqa: F401,F403
from .secondary import *  # noqa: F401,F403
from .selection import *  # noqa: F401,F403
