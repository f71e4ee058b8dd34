"""En-route linear transforms for tree-based data gathering."""
from .errors import *  # noqa: F401,F403
from .topology import Network, RadioModel, random_network
from .scheduling import assign_schedule, causal_sets_for
from .transform import decode_epochs, encode_epochs, verify_invertibility
from .zoo import build_scheme

__version__ = "0.1.0"
