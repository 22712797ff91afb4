"""Multilevel quantized-tensor-train space-time solvers for nonlinear PDEs."""
