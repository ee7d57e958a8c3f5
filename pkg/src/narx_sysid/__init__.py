"""NARX neural-network identification of quadrotor attitude-rate dynamics."""

__version__ = "0.1.0"
