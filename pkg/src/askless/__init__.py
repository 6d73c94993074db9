"""Program-guided eligibility screening.

Rule checkers compiled from benefit requirements drive a dialog engine
that asks only for the features its programs actually demand, plus a
benchmark harness, baseline agents, simulated users, and an HTTP service.
"""

__version__ = "0.1.0"
