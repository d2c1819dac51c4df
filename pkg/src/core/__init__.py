"""Numerical core of the moment-method toolkit: function spaces, spectra, classification, changes of unknown, biorthogonal families, moment solves and simulation."""
