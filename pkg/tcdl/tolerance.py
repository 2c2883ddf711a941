PROBABILITY_SUM = 1e-12
CHAIN_PRODUCT = 1e-10
CPS_CHECK = 1e-10
SELF_FINANCING = 1e-10

LP_FEASIBILITY = 1e-9
LP_OPTIMALITY = 1e-9
HIGHS_FEASIBILITY = 1e-10
LP_GAP = 1e-8
LP_SLACKNESS = 1e-8

BARRIER_KKT = 1e-8
BARRIER_STRICT_MARGIN = 1e-10

ZERO_DENSITY = 1e-12
YHAT_RESIDUAL = 1e-7

BELOW_X0_MARGIN = 1e-12
