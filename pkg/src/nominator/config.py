import os

LOG_LEVEL = os.getenv("NOMINATOR_LOG_LEVEL", "INFO").upper()
DEFAULT_SEED = int(os.getenv("NOMINATOR_SEED", "0"))
DEFAULT_JOBS = int(os.getenv("NOMINATOR_JOBS", "1"))
# resamples per bootstrap interval
DEFAULT_N_BOOT = int(os.getenv("NOMINATOR_N_BOOT", "10000"))
