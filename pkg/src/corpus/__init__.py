# File: src/corpus/__init__.py
# Marks 'corpus' as a Python package: seeded synthetic IER corpora.
