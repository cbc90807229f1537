"""
Infrastructure: exceptions, presets and output writers.
"""
