"""Tests package for dlczsim."""
