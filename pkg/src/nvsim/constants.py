"""Physical constants and fixed conventions (SI units throughout)."""

import math

# NV ground-state electron gyromagnetic ratio.
GAMMA_E_HZ_PER_T = 28.024e9                     # Hz / T
GAMMA_E = 2.0 * math.pi * GAMMA_E_HZ_PER_T      # rad / s / T

# Ground-state zero-field splitting.
ZERO_FIELD_SPLITTING_HZ = 2.870e9

MU_0 = 4.0e-7 * math.pi                         # T m / A

# Feed-line impedance used to convert drive power to current.
LINE_IMPEDANCE_OHM = 50.0

# cos(angle) between the aligned <111> class and the other three classes.
COS_MISALIGNED = 1.0 / 3.0
