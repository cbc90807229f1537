"""
Exception classes for the RQG system.
"""


class RQGError(Exception):
    """Base exception for all RQG errors."""
    pass


class RQGConfigError(RQGError):
    """Exception raised for configuration and schema errors."""
    pass


class RQGRangeError(RQGConfigError):
    """Exception raised for out-of-range indices, photon counts or dimensions."""
    pass


class RQGPhysicsError(RQGError):
    """Exception raised for physically inconsistent parameter sets."""
    pass


class RQGIntegrationError(RQGPhysicsError):
    """Exception raised when time integration cannot be trusted."""
    pass


class RQGCalibrationError(RQGPhysicsError):
    """Exception raised for missing or failed drive calibration."""
    pass


class RQGFidelityError(RQGPhysicsError):
    """Exception raised for invalid inputs to fidelity measures."""
    pass
