"""
Low level file codecs - MatrixMarket and flat key=value manifests.
"""
