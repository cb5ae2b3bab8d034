"""Regenerate the bundled language profiles from tools/langid_training/*.txt."""

from pathlib import Path

from torscope.langid import build_profile, write_profile

HERE = Path(__file__).resolve().parent
OUT = HERE.parent / "src" / "torscope" / "data" / "profiles"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for src in sorted((HERE / "langid_training").glob("*.txt")):
        profile = build_profile(src.stem, src.read_text(encoding="utf-8"))
        write_profile(profile, OUT / f"{src.stem}.txt")
        print(f"{src.stem}: {len(profile)} n-grams")


if __name__ == "__main__":
    main()
