"""Fetch MovieLens-100K into data/ml-100k/u.data.

The ratings come from the copy bundled with the recbole wheel on the package
index (atomic file ml-100k.inter), rewritten in the original tab-separated
user, item, rating, timestamp layout.
"""

import argparse
import pathlib
import subprocess
import sys
import tempfile
import zipfile

MEMBER_SUFFIX = "ml-100k/ml-100k.inter"


def find_member(archive: zipfile.ZipFile) -> str:
    for name in archive.namelist():
        if name.endswith(MEMBER_SUFFIX):
            return name
    raise SystemExit("ml-100k.inter not found in the downloaded wheel")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=pathlib.Path,
                        default=pathlib.Path(__file__).resolve().parent.parent / "data" / "ml-100k" / "u.data")
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary", ":all:",
                        "recbole", "-d", tmp], check=True)
        wheel = next(pathlib.Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as archive:
            lines = archive.read(find_member(archive)).decode("utf-8").splitlines()

    rows = [line for line in lines[1:] if line.strip()]  # first line is the typed header
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("".join(row + "\n" for row in rows))
    print(f"wrote {len(rows)} ratings to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
