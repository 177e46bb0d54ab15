"""Frozen expected values, computed with an independent mpmath oracle
(dps = 40): dense scans plus findroot for extrema, direct arbitrary-precision
evaluation of every closed-form constant.  Values are frozen here so tests do
not depend on the implementation under test.
"""
import math

PAPER_RADIAL = "sqrt(4*cos(2*t) + sqrt(16*cos(2*t)^2 + 12))"
PAPER_PHI = "exp(-y)/20 + 1"

# boundary-data statistics over the closed domain
Y_MIN = -1.32287565553          # at t = 3.8643269014
TAU = 0.187710083021            # e^{-Y_MIN}/20; all three suprema coincide
OMEGA = 0.174391672205          # (e^{-Y_MIN} - e^{Y_MIN})/20

# curvature profile
KAPPA_MIN = -0.45040350104      # at t = pi/2 (and 3*pi/2)
KAPPA_MAX_ABS = 0.824047201281  # at t = 0 (and pi)
ARCS = ((math.pi / 3, 2 * math.pi / 3),
        (4 * math.pi / 3, 5 * math.pi / 3))

# exterior disk: osculating-capped at the curvature minimum
R_EXT = 1.0 / abs(KAPPA_MIN)    # 2.2202314096

# criterion constants from the true tau and lambda_r = -1/R_EXT
RHO = 0.2009380408
A = 3.569749685
B = -11.99700779
C = 0.1753529353
THETA = 9.052223572
SIGMA = -1.617998029
DELTA_MAX = 1.361565581
BOUND_MO_1 = 0.4328372532       # oscillation bound at delta = 1
HC = 0.4489558496
HC2 = 0.09957063464
SH_LHS = -0.2863782768
SHE = 3.46330906

# classical bound with the transcribed hand estimates
# (l = 0.25, l' = 0.1767, k = 0.82, |Dphi| = |D2phi| = 0.1871, H = 0.45, n = 2)
JS_T_A = 17.7792453514
JS_T_C = 10.2523799261
JS_T_B = 0.007252166573
# same inputs with the default l' = l/sqrt(2) = 4*sqrt(2)*pi / ...
JS_P_A = 17.7715317526          # = 4 sqrt(2) pi
JS_P_C = 10.2479318889
JS_P_B = 0.007254551254

# constants() with the printed rounded inputs tau=0.1871, lam=-0.45, mu=0.45
EX_RHO = 0.200199398622
EX_A = 3.56856735604
EX_B = -12.0340342008
EX_C = 0.17485771806
EX_THETA = 9.06256871954
EX_DELTA_MAX = 1.36554325512

# closed forms evaluated at the literal rounded constants theta=9.05,
# rho=0.2002, a=3.569
LIT_HC = 0.4507074456
LIT_HC2 = 0.09995132413
# psi(1) for rho=0.2002, sigma=rho(1-9.05) = -1.61161
PSI1_ROUNDED = 0.43414147

# curve jet of the boundary at t = 0
CURVE_POS0 = 3.0481966180234    # sqrt(4 + sqrt(28))
CURVE_ACC0_X = -7.6566367314622

# maximum of a(tau)
A_STAR = 2.0 + math.sqrt(3.0)           # 3.7320508
TAU_STAR = (math.sqrt(3.0) - 1.0) / 2.0  # 0.3660254
