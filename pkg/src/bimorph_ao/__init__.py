"""Bimorph deformable-mirror adaptive optics with H-infinity output feedback."""

__version__ = "0.1.0"
