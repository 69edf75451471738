# keeps the tests directory importable so the file builders in
# helpers.py can be shared across test modules
