"""meanfield-lab: a desk-scale numerical laboratory for the mean-field
limit of interacting quantum particles on a periodic grid.

Modules follow the pipeline: ``phasespace`` (Weyl/Wigner/Moyal calculus on
band-limited symbols), ``potentials`` and ``qdyn`` (Hartree and N-body
propagation, marginals), ``cdyn`` (interacting particles, empirical
measures, characteristics), ``qemp`` (the operator-valued empirical measure
and its evolution identities), ``egorov`` (quantum vs classical observable
transport), ``metrics``/``experiments`` (dual-norm metric and the N-scaling
experiment), ``suites`` (the acceptance checks), ``service`` and ``cli``
(HTTP interface and its thin client).
"""

__version__ = "0.1.0"

from .phasespace import (  # noqa: F401
    FourierSymbol,
    Grid,
    GridOperator,
    PlanckScale,
    make_grid,
    moyal,
    quantize,
    wigner_field,
    wigner_pair,
)
