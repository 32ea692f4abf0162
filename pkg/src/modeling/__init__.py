# File: src/modeling/__init__.py
# Marks 'modeling' as a Python package: optimizer, action classifier, CRF tagger and the training pipeline.
