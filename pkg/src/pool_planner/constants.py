"""Numeric constants, root brackets and tolerances shared by the planner."""

import math
from enum import Enum

# Below this prevalence pooling pays off: D_1((3), RHO0) == 1.
RHO0 = 1.0 - 3.0 ** (-1.0 / 3.0)

# 3**39 < 2**63 <= 3**40
MAX_STAGES = 39
INT64_MAX = 2**63 - 1

UNIT_ROUNDOFF = 2.0**-53


class Family(str, Enum):
    """The four candidate-optimal pool chains."""

    M33 = "m33"
    M34 = "m34"
    M23 = "m23"
    M24 = "m24"


# Bisection brackets for the transition constants.
ALPHA1_BRACKET = (0.05, 0.3)
ALPHA2_BRACKET = (0.3, 1.0)
BETA_BRACKET = (0.01, 1.0)
A1_BRACKET = (0.01, 0.12)
A2_BRACKET = (0.06, 0.3)
BISECT_MAXITER = 200
DEFAULT_ROOT_TOL = 1e-12

# Relative window inside which two costs count as a tie.
TIE_RTOL = 1e-13

# Relative error charged to one libm call (log1p, expm1, exp).
LIBM_RELERR = 2.0 * UNIT_ROUNDOFF

# Lower bound on q**m1 at an optimum.
Q_M1_FLOOR = 3.0 ** (-4.0 / 3.0)

LOG3 = math.log(3.0)

# Enumeration oracle limit (2**20 infection patterns).
MAX_ENUMERATION_POOL = 20

# Monte Carlo work unit: replications * m1 booleans per chunk.
MC_CHUNK_CELLS = 1 << 22

# Tree rendering cap.
TREE_MAX_NODES = 64

# |u - round(u)| below this counts as p == exp(-u) for integer u.
INTEGER_STAGE_TOL = 1e-5
