"""qcalc: calculus, integration and wave mechanics on the q-lattice."""

__version__ = "0.1.0"
