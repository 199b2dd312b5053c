"""Test suite for divas."""
