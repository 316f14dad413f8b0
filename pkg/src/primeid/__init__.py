"""Identification codes keyed by random primes."""

__version__ = "0.1.0"
