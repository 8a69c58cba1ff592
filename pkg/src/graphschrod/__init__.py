"""Discrete Schrodinger operators on weighted graphs.

Finite Dirichlet sections, energy forms, resolvent solvers and truncation
experiments for ``L_V f(x) = (1/mu(x)) sum_y b(x,y)(f(x) - f(y)) + V(x) f(x)``.
"""

from .errors import *  # noqa: F401,F403
from .experiments import (
    coincidence_over_exhaustion,
    deficiency_probe_birth_death,
    formsum_vs_friedrichs,
    positive_core_approximation,
    stability_pipeline,
)
from .forms import (
    finite_energy_check,
    form_norm_eval,
    form_Q,
    form_Q_quadratic,
    greens_identity_residual,
    greens_identity_terms,
    pairing_a,
)
from .graph import (
    Exhaustion,
    FiniteGraph,
    Potential,
    WeightedGraph,
    ball_exhaustion,
    check_fc,
    connected_components,
    make_birth_death,
    make_chain,
    make_infinite_star,
    make_lattice,
    make_path,
    make_star,
    validate_graph,
)
from .schrodinger import (
    FiniteSection,
    apply_formal,
    dirichlet_section,
    in_domain_F,
    kato_inequality_check,
    truncate_above,
    truncate_negative_part,
)
from .solvers import (
    ShiftedOperator,
    domination_check,
    lambda0,
    operator_function,
    positivity_check,
    resolvent_apply,
    src_monitor,
)

__version__ = "0.1.0"
