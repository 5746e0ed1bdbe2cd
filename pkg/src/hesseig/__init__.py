"""Numerical solver and verification suite for the weighted k-Hessian
eigenvalue problem S_k(D^2 u) = (|x|^{2s} |lambda u|)^k, u = 0 on the
boundary of a domain containing the origin.

Modules:
    symfun       elementary symmetric polynomials, cones, dual-cone values
    radial       closed-form and shooting oracles on balls
    domains      disk/ellipse/square descriptors
    grids        masked cut-cell grids, discrete operators, quadrature
    dirichlet    Poisson, 2-D Monge-Ampere, and the monotone source iteration
    eigensolve   threshold bisection, delta continuation, cross-checks
    variational  Hessian energies, Rayleigh quotients, descent flow
    verify       a priori estimate checks, potentials, linearized problem
    config, cli  batch front end
"""

from .domains import Disk, Ellipse, Square, parse_domain
from .problem import ProblemSpec

__all__ = ["Disk", "Ellipse", "Square", "parse_domain", "ProblemSpec"]
__version__ = "0.1.0"
