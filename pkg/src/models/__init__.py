"""Pydantic report models."""
