import logging
import sys

from nominator.config import LOG_LEVEL


def create_logger(name: str, level: int | str = LOG_LEVEL, **context) -> logging.Logger:
    """
    :param context: run identifiers (seed, study counts) shown next to the logger name, so
        interleaved lines of parallel trials stay attributable
    """
    logger = logging.Logger(name)
    # stdout is reserved for command results (nominee, tables)
    ch = logging.StreamHandler(sys.stderr)

    tag = " ".join([name, *(f"{key}={value}" for key, value in context.items())])
    formatting = (
        f"[{tag}] %(asctime)s\t%(levelname)s\t%(module)s.%(funcName)s#%(lineno)d | %(message)s"
    )
    ch.setFormatter(logging.Formatter(formatting))

    logger.addHandler(ch)
    logger.setLevel(level)

    return logger
