"""Tests for wak_converse package."""
