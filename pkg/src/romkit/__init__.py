"""Hand range-of-motion measurements from 3D hand skeleton sequences."""
__version__ = "0.1.0"
