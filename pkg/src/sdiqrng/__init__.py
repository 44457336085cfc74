"""Semi-device-independent randomness generation toolkit.

Certified guessing-probability bounds for binary prepare-and-measure
devices under a state-overlap assumption, seedless (deterministic)
randomness extractors with exact Walsh-Hadamard bias verification, and a
spot-checking generation protocol with finite-size and asymptotic rate
simulation.  See README.md for the CLI and the acceptance suite.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend  # noqa: F401
from .behaviors import Behavior, apply_uniform_noise, family_behavior  # noqa: F401
from .extractors import construct_random_extractor, xor_extract  # noqa: F401
from .guessing import solve_dual, solve_primal_oracle, verify_dual_feasible  # noqa: F401
from .protocol import ProtocolConfig, run_protocol, solve_length  # noqa: F401
from .rates import asymptotic_rate_mul, finite_rate  # noqa: F401
