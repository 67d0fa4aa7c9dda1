"""
This module contains global variables used throughout the application. It also
contains the exception hierarchy and functions that are used by multiple
modules.
"""
from configparser import ConfigParser
from fractions import Fraction
import logging
import os

import numpy as np

from utility import defaults


class QldpcError(Exception):
    """Base class for every error raised by the toolkit."""


class NonPrimitivePolynomial(QldpcError):
    """The polynomial does not generate the full multiplicative group."""


class DivisionByZero(QldpcError, ZeroDivisionError):
    """Inversion of the zero field element."""


class ModulusMismatch(QldpcError):
    """Two affine permutations over different moduli were combined."""


class InvalidCycle(QldpcError):
    """A block cycle or Tanner cycle does not fit the array it is used on."""


class RequirementViolation(QldpcError):
    """A generator pair breaks the commutativity requirement."""


class SearchExhausted(QldpcError):
    """The randomized generator search ran out of attempts."""


class NoUnitPivot(QldpcError):
    """A residual row of a modular system has no unit entry to pivot on."""


class IterationLimitExceeded(QldpcError):
    """A perturbation loop hit its iteration cap."""


class RankAnomaly(QldpcError):
    """A cycle submatrix has a rank other than the one the design implies."""


class DimensionMismatch(QldpcError):
    """A vector length does not match the matrix it is applied to."""


class FormatError(QldpcError):
    """A code file cannot be parsed."""


class InvariantViolation(QldpcError):
    """A loaded or assembled code breaks one of its invariants."""


class NoDeficientCycles(QldpcError):
    """No rank-deficient cycle contributed to the distance bound."""


def setup_logging(level=None):
    """Configure the root logger once.

    The level is taken from the argument, then from the QLDPC_LOG environment
    variable, then from the settings file.

    Args:
        level (str | int, optional): A logging level name or number.

    Returns:
        logging.Logger: The package logger.
    """
    global logger

    # Resolve the level
    if level is None:
        level = os.environ.get("QLDPC_LOG")
    if level is None and settings is not None:
        level = settings.get("system", "log_level", fallback="INFO")
    if level is None:
        level = "INFO"
    if isinstance(level, str):
        level = int(level) if level.isdigit() else level.upper()

    # Configure the root handler
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s"
    )
    logging.getLogger().setLevel(level)

    # Create the package logger
    logger = logging.getLogger("qldpc")
    return logger


def load_settings(file_name=None):
    """Load the settings file, creating it with defaults if needed.

    Args:
        file_name (str, optional): Path of the INI file. Defaults to the
            QLDPC_SETTINGS environment variable or "settings.ini".

    Returns:
        ConfigParser: The loaded settings, also stored in common.settings.
    """
    global settings

    # Resolve the file name
    if file_name is None:
        file_name = os.environ.get("QLDPC_SETTINGS", "settings.ini")

    # Create the file if it doesn't exist, then read it
    defaults.create_settings_file(file_name)
    settings = ConfigParser()
    settings.read(file_name)
    return settings


def default_settings():
    """Return a ConfigParser holding the built-in defaults without touching disk.

    Returns:
        ConfigParser: The default settings.
    """
    config = ConfigParser()
    defaults.populate_settings(config)
    return config


def parse_number(text):
    """Parse a decimal or a simple fraction such as "1/3".

    Args:
        text (str | float): The value to parse.

    Returns:
        float: The parsed value.
    """
    if isinstance(text, (int, float)):
        return float(text)
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def parse_range(text):
    """Parse a p_D value, either a number or a range "a:b:step".

    The range is inclusive of b when b lies on the grid.

    Args:
        text (str): The value or range.

    Returns:
        list[float]: The values.
    """
    if ":" not in text:
        return [parse_number(text)]
    start, stop, step = (parse_number(part) for part in text.split(":"))
    if step <= 0:
        raise ValueError(f"range step must be positive: {text}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def derive_rng(master_seed, *stream):
    """Create an independent generator for a counter-based stream.

    The same (master_seed, *stream) always yields the same generator no matter
    which worker or in which order it is requested.

    Args:
        master_seed (int): The run seed.
        *stream (int): Stream coordinates such as (sweep point, trial).

    Returns:
        numpy.random.Generator: The generator.
    """
    sequence = np.random.SeedSequence([int(master_seed), *map(int, stream)])
    return np.random.default_rng(sequence)


def derive_seed(master_seed, *stream):
    """Derive an integer seed from a counter-based stream.

    Args:
        master_seed (int): The run seed.
        *stream (int): Stream coordinates.

    Returns:
        int: A 63-bit seed.
    """
    sequence = np.random.SeedSequence([int(master_seed), *map(int, stream)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# A configparser object which contains the settings from the settings file
settings = None

# The package logger, set by setup_logging
logger = logging.getLogger("qldpc")
