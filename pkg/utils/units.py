"""dB <-> linear conversions used at the configuration and reporting edges."""

import numpy as np


def db_to_linear(value_db):
    """Convert a power ratio from dB to linear scale"""
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    """Convert a linear power ratio to dB"""
    return 10.0 * np.log10(np.asarray(value, dtype=float))
