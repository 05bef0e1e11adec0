"""Test package for aleatory_facility."""
