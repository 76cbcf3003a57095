"""Tests for configuration system."""