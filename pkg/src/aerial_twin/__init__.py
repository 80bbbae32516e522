"""Batch-mode digital twin of an aerial Open RAN testbed.

Vehicles, a dynamic wireless channel, a sliced RAN scheduler and spectrum
compliance supervision, driven by declarative JSON scenarios.
"""

__version__ = "0.1.0"
