"""Bundled network descriptions, loaded with ``NetworkDescription.fixture``"""
