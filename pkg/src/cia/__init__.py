"""Change-impact analysis over two program versions using equivalence relations."""
__version__ = "0.1.0"
