"""
Core package of the chirplet separation toolkit.
"""
