# File: src/annotation/__init__.py
# Marks 'annotation' as a Python package: vocabulary, bracket format and BIO codec.
