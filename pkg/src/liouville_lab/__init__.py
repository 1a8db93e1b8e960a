"""Classical laboratory for Liouville / Fokker-Planck ensemble transport of Burgers dynamics."""

__version__ = "0.1.0"
