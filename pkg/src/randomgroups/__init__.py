"""Workbench for random group presentations in the Gromov density model.

Library layout:
  words      free-group word algebra, exact counting/sampling, piece scanning
  model      presentation sampling, nesting, persistence
  cayley     Dehn's algorithm, exact Cayley balls, genericity scans
  diagrams   restricted abstract van Kampen diagrams and filling search
  bounds     closed-form bound evaluation and fillability probabilities
  roundtree  combinatorial round trees, axiom checks and distortion probes
  cli        the `randomgroups` command-line front end
"""

__version__ = "0.1.0"

from .words import (  # noqa: F401
    Alphabet,
    CyclicWord,
    check_c_prime,
    cyclically_reduce,
    enumerate_cyclically_reduced,
    max_piece_length,
    reduce_word,
    rivin_count,
    sample_cyclically_reduced,
)
from .model import (  # noqa: F401
    Presentation,
    extend_presentation,
    load_presentation,
    relator_count,
    sample_presentation,
    save_presentation,
)
