# Keeps the tests directory importable for oracles.py / helpers.py.
