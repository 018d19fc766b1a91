# qelab/services/__init__.py

# This file is intentionally left empty to mark the directory as a Python package.
# Import specific services directly from their modules as needed.
