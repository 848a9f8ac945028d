"""sensorcond: recurrent time-series models conditioned on the available sensor set."""

__version__ = "0.1.0"
