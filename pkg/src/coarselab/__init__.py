"""coarselab: a desk-scale numerical laboratory for rough index theory.

Finite windows of quasi-lattices carry uniformly finite chains, coarse
cochains, finite-propagation operators with dominating-function calculus,
chain-level cyclic homology with Chern characters, and a constructive
simplicial filling map; every quantitative estimate relating them is checked
numerically in a sound (certified-lower vs certified-upper) direction.
"""

__version__ = "0.1.0"

from . import cochain, cyclic, fill, opalg, spaces, ufchain  # noqa: F401
from .spaces import Window, make_window  # noqa: F401
from .ufchain import UfChain  # noqa: F401
