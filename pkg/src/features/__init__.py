# File: src/features/__init__.py
# Marks 'features' as a Python package: tokenization, word vectors and feature templates.
