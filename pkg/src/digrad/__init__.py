"""DiGrad: multi-task actor-critic learning with shared continuous actions."""
__version__ = "0.1.0"
