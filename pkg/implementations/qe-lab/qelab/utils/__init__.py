# qelab/utils/__init__.py

# Helpers shared across services; import them from their modules.
