DEFAULT_TOL = 1e-9
DEFAULT_TRIALS = 5
DEFAULT_SEED = 0
DEFAULT_TRANSFER_SAMPLES = 3
DEFAULT_HORIZON = 10.0
DEFAULT_STEPS = 1000
DEFAULT_EXACT_LIMIT = 16

# Literal col{Q Phi^k dPhi} stacking is only cross-checked below this state size
STACKED_CHECK_LIMIT = 20

# Free weights are drawn from [-MAX, -MIN] U [MIN, MAX]
WEIGHT_MIN = 0.1
WEIGHT_MAX = 2.0

MAX_SOLVE_RETRIES = 10
MAX_WITNESS_DRAWS = 20

LOG_LEVEL_ENV = "NETDIAG_LOG_LEVEL"
