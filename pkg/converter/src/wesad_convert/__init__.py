"""Converter from per-subject wearable-study pickle archives to a neutral
on-disk format: one little-endian float32 file per wrist channel, the
700 Hz protocol label track as uint8, and a manifest.json describing all
of it. The format is bit-exact, byte-stable across reruns, and trivially
parseable from any language.
"""

__version__ = "0.1.0"
