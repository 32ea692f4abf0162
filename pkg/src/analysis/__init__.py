# File: src/analysis/__init__.py
# Marks 'analysis' as a Python package: classification and span scores, annotator agreement.
