import re
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
MODULES = {"python-dotenv": "dotenv", "PyYAML": "yaml"}


def _declared():
    lines = (ROOT / "requirements.txt").read_text(encoding="utf-8").splitlines()
    return [line.split("==")[0].strip() for line in lines if line.strip() and not line.startswith("#")]


def _sources():
    files = [ROOT / "app.py", *(ROOT / "src").rglob("*.py"), *(ROOT / "tests").rglob("*.py")]
    return "\n".join(f.read_text(encoding="utf-8") for f in files)


def test_every_declared_package_is_imported():
    text = _sources()
    for package in _declared():
        module = MODULES.get(package, package.lower().replace("-", "_"))
        assert re.search(rf"^\s*(import|from) {module}\b", text, re.MULTILINE), package


def test_typing_extensions_is_not_declared():
    assert "typing-extensions" not in _declared()
