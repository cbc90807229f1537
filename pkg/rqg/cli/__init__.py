"""
Command-line interface for the RQG simulator.
"""
