"""Contact-implicit model-predictive control for planar robots.

Library layout:

- ``terrain``, ``chain``, ``model``: rigid-body systems with contacts
- ``lcp``: path-following solver for cone-constrained residual programs
  and implicit-function-theorem sensitivities
- ``contact``: nonlinear hard-contact step, derivatives, simulation
- ``linearized``: reference-trajectory linearization into time-varying
  LCP stages with a condensed (Schur complement / QR) linear solver
- ``trajopt``: tracking trajectory optimizer over lifted two-config
  states, block-tridiagonal KKT solver
- ``mpc``: receding-horizon policy with the contact-height heuristic
- ``harness``: reference generation, scenarios, metrics, Monte Carlo
- ``cli``: command-line entry point
"""

__version__ = "0.1.0"
