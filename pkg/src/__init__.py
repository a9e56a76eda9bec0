"""
Kawahara / modified Kawahara numerical laboratory
"""

__version__ = "1.0.0"
