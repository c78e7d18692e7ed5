"""Joint source, test channel and rate-distortion-equivocation region."""
