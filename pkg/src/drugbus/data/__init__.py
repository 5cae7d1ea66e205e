"""Bundled data files: the canonical drug schema and the demo drug-name word list."""
