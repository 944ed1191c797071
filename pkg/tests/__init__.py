"""Test package for seqclass."""
