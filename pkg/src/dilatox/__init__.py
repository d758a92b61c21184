"""Dilatation structures on concrete metric spaces.

Library and CLI for working with based-contraction families on metric
spaces: concrete models (normed vector spaces, the Heisenberg group,
generic step-2 graded groups, a geodesic sphere chart), numerical
verification of the structure axioms, reconstruction of metric tangent
spaces, fixed points of composed dilatations, and normalization of words
in the inverse semigroup the dilatations generate.
"""

from .axioms import (
    CheckReport,
    LimitEstimate,
    ToleranceSchedule,
    check_a1,
    check_a2,
    check_a3,
    check_a4,
    check_linearity,
    check_norm_axioms,
    estimate_limit,
)
from .core import (
    DilatationMap,
    DilatationStructure,
    ModelDomain,
    approx_difference,
    approx_inverse,
    approx_sum,
    cone_quotient,
)
from .menelaos import (
    IterationTrace,
    banach_iteration,
    composition_center,
    check_invariance,
    euclidean_center_closed_form,
    menelaos_iteration,
    verify_menelaos,
)
from .models import (
    EuclideanModel,
    HeisenbergModel,
    SphereModel,
    Step2CarnotModel,
    make_dilatation_structure,
    model_from_descriptor,
    random_step2,
)
from .semigroup import (
    CanonicalElement,
    Dilatation,
    Identity,
    LeftTranslation,
    Word,
    apply_canonical,
    compose_canonical,
    normalize_word,
    translation_from_pair,
    verify_normal_form,
)
from .tangent import TangentSpace, tangent_inv, tangent_metric, tangent_op, tangent_space, verify_conical

__version__ = "0.1.0"
