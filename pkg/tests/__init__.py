"""Test qocr."""
