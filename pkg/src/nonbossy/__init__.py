"""Verification, synthesis and search for nonbossy mechanisms."""
