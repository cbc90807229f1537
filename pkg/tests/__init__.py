"""
Test suite for the RQG system.
"""
