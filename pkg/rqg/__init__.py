"""
Resonator Qudit Gates (RQG)
Numerical simulation of c-phase and cc-phase gates on microwave-photon
resonator qudits coupled to a single transmon qutrit.
"""

__version__ = "0.1.0"
