"""Entry point for running homodyne-forge as a module: python -m homodyne_forge"""

from homodyne_forge.cli import main

if __name__ == "__main__":
    main()
