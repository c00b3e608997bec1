"""Pytest configuration and fixtures."""

import django
from django.conf import settings as django_settings
import pytest


# Configure Django settings before any tests run
def pytest_configure():
    """Configure Django settings for testing."""
    if not django_settings.configured:
        django_settings.configure(
            DEBUG=True,
            SECRET_KEY="test-secret-key",
            INSTALLED_APPS=["meander_nfc"],
        )
        django.setup()


@pytest.fixture
def settings():
    """
    Provide Django settings object that can be modified during tests.

    Tests that change a MEANDER_NFC_* value should use ``override_settings``
    so the change does not leak.
    """
    return django_settings


@pytest.fixture
def minimal_scenario():
    """One meander reader and one tag, no sweeps."""
    return {
        "name": "minimal",
        "seed": 7,
        "reader": {"kind": "meander", "panel_width": 0.2, "panel_height": 0.3, "n_runs": 4},
        "tags": [{"uid": 1, "sensor_kind": "temperature"}],
    }
