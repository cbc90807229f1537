"""
Application layer: gate protocols, calibration and experiment services.
"""
