"""Light-field image coding with sparse reference views, GAN view synthesis
and multi-view quality enhancement."""

__version__ = "0.1.0"
