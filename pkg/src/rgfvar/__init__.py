"""Recursive Gaussian filters for 3D-VAR horizontal covariances."""
