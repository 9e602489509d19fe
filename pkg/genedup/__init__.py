"""Gene-duplication diffusion models: closed forms, simulation and verification."""

__version__ = "0.1.0"
