"""Prime-field arithmetic and the polarizing transform."""
