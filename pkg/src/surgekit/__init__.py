"""surgekit: a peak storm surge surrogate modeling toolkit.

Detects surge events from gauge residuals, builds point-based feature
matrices from meteorological and bathymetric inputs, trains two-stage
(wet/dry classification + inundation regression) surrogates, and evaluates
them. A synthetic-corpus generator with an analytic surge oracle allows the
whole pipeline to be validated at desk scale.
"""

__version__ = "0.1.0"
