"""
Test package for the ECBF manipulator toolkit.
"""
