"""Polar code construction, encoding/decoding and frozen-vector time sharing."""
