"""planarmimic: deterministic desk-scale contact-guided interaction imitation."""

__version__ = "0.1.0"
