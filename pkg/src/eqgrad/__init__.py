"""eqgrad: a small numpy deep-learning framework with SE(2)-equivariant layers."""
from . import activations, autograd, ops  # noqa: F401  (importing registers backward rules)
from . import gcnn, landscapes, layers, optim, tropical  # noqa: F401
from . import harness  # noqa: F401

__version__ = "0.1.0"
