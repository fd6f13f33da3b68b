"""Physical constants. Frequencies are ordinary (Hz), never angular."""

GAMMA_EL = 28.024e9  # electron gyromagnetic ratio, Hz/T
MU0_OVER_4PI = 1e-7  # T m / A
PROTON_MOMENT = 1.4106e-26  # J/T
AVOGADRO = 6.02214076e23  # 1/mol
