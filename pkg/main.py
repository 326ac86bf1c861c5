# main.py
import logging
import sys

import coloredlogs

from app.config import LOG_LEVEL, LOGGING_ENABLED
from app.experiment_runner import run

# -----------------------------------------------------------------------------
# Logging setup
# -----------------------------------------------------------------------------
for handler in logging.root.handlers[:]:
    logging.root.removeHandler(handler)

if LOGGING_ENABLED:
    coloredlogs.install(
        level=LOG_LEVEL,
        fmt="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
else:
    logging.basicConfig(level=logging.CRITICAL)

logger = logging.getLogger("main")

if __name__ == "__main__":
    try:
        sys.exit(run(sys.argv[1:]))
    except KeyboardInterrupt:
        logger.info("Interrupted by user. Exiting.")
        sys.exit(130)
