"""
Package level utilities - logger setup, float formatting and stable hashing.
"""
import hashlib
import logging
import sys
from typing import Iterable, Union

import numpy as np

LOGGER_NAME = "optspace"

logger = logging.getLogger(LOGGER_NAME)


def set_logger(log_level: Union[int, str] = logging.INFO) -> logging.Logger:
    """Attach a single stdout handler to the package logger.

    Calling it again only changes the level.

    :param log_level: logging level name or number.
    """
    logger.setLevel(log_level)
    if not any(getattr(h, "_optspace", False) for h in logger.handlers):
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
        handler._optspace = True  # pylint: disable=protected-access
        logger.addHandler(handler)
    return logger


def fmt_float(value: float) -> str:
    """Format float with 17 significant digits so it parses back bit-exact."""
    return f"{float(value):.17g}"


def fmt_floats(values: Iterable[float], sep: str = ";") -> str:
    return sep.join(fmt_float(v) for v in values)


def parse_floats(text: str, sep: str = ";") -> np.ndarray:
    if not text:
        return np.zeros(0)
    return np.array([float(v) for v in text.split(sep)])


def stable_hash(*parts: object) -> str:
    """SHA-256 hex digest of the canonical text of the parts.

    numpy arrays contribute their shape, dtype and raw bytes.
    """
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            digest.update(f"{part.shape}{part.dtype}".encode())
            digest.update(np.ascontiguousarray(part).tobytes())
        else:
            digest.update(repr(part).encode())
        digest.update(b"|")
    return digest.hexdigest()
