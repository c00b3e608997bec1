# meander_nfc/conf.py
"""
Settings access.

Every tunable default can be overridden from Django settings with a
``MEANDER_NFC_`` prefix, e.g. ``MEANDER_NFC_SAMPLE_RATE_HZ = 13.56e6``.
Outside a configured Django project the defaults below are used.
"""
from django.conf import settings

PREFIX = "MEANDER_NFC_"

DEFAULTS = {
    # carrier and NFC-A timing
    "CARRIER_HZ": 13.56e6,
    "SUBCARRIER_DIVIDER": 16,
    "SAMPLE_RATE_HZ": 13.56e6 / 2,
    "DEFAULT_SEED": 0,
    # magnetics
    "MAX_SEGMENT_LENGTH": 5e-3,
    "CLOSE_PAIR_RADII": 5.0,
    "CALIBRATION_SEGMENT_LENGTH": 1e-2,
    # circuit
    "BALANCE_THRESHOLD": 0.10,
    "R_AMP": 1e3,
    "V_IN": 1.0,
    # receiver
    "BUTTERWORTH_ORDER": 5,
    "CUTOFF_FACTOR": 1.5,
    "EQUALIZER_TAPS": 9,
    "EQUALIZER_STEP": 0.01,
    "PREAMBLE_BITS": 48,
    "SYNC_THRESHOLD": 0.2,
    "BER_TARGET": 1e-3,
    "CALIBRATION_MARGIN_DB": 1.5,
    # power
    "LED_THRESHOLD_W": 1e-3,
    "RECTIFIER_EFFICIENCY": 1.0,
    # runner
    "THREADS": 1,
    "OUTPUT_FORMAT": "csv",
}


def setting(name):
    """Return ``MEANDER_NFC_<name>`` from Django settings, or its default."""
    if name not in DEFAULTS:
        raise KeyError(f"Unknown meander-nfc setting: {name}")
    if not settings.configured:
        return DEFAULTS[name]
    return getattr(settings, PREFIX + name, DEFAULTS[name])
