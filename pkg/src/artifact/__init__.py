"""Wave equations with repulsive potentials: a numerical laboratory."""

__version__ = "0.1.0"
