"""
plasmoshape: plasmon-resonance enhanced shape reconstruction from far-field data
"""

__version__ = "0.1.0"
