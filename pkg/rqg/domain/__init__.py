"""
Domain layer: Hilbert space, Hamiltonians, time evolution and analysis.
"""
