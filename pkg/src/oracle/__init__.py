"""Exact small-blocklength evaluation of the coding scheme."""
