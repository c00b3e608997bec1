"""
meander-nfc: body-scale 13.56 MHz meander-coil sensor network simulator.

Install as a Django app (``INSTALLED_APPS = [..., "meander_nfc"]``) to get the
management commands, or run the ``meander-nfc`` console script.
"""

__version__ = "0.1.0"
