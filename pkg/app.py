import sys

from src.main import main

# Ponto de entrada: python app.py sweep --config configs/example.yaml
if __name__ == "__main__":
    sys.exit(main())
