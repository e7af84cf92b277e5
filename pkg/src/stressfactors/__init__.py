"""Financial stress indices from non-stationary dynamic factor models, evaluated by growth-at-risk."""
__version__ = "0.1.0"
