"""Tests for treealign."""
