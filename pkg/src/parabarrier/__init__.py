"""Barriers, coercivity profiles and grid solvers for doubly nonlinear parabolic equations
H(Du, D^2u) + chi(t)|Du|^Gamma - f(u) u_t = 0."""

__version__ = "0.1.0"
