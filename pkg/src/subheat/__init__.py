"""subheat: spectral and regular heat contents of time-changed Brownian motion.

Samplers for subordinators and their inverses, exact interval heat-content
oracles, Rao-Blackwellised estimators, closed-form small-time limits and
the acceptance suites that tie them together.
"""

__version__ = "0.1.0"
