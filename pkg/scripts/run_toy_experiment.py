"""Run the toy rolling-origin experiment twice: built-in experts, then imported forecasts.

Writes results/toy/builtin and results/toy/imported and prints both AR tables.
"""

import argparse
from pathlib import Path

from cohcomb.cli import main as cli

DATA = Path(__file__).resolve().parents[1] / "data" / "toy"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/toy"))
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    common = ["--config", str(DATA / "toy.toml"), "--threads", str(args.threads)]

    print("== built-in experts ==")
    code = cli(["run", *common, "--out", str(args.out / "builtin")])
    if code:
        raise SystemExit(code)
    print("\n== imported forecasts ==")
    code = cli(["run", *common, "--forecasts", str(DATA / "toy_forecasts.csv"), "--experts", "",
                "--mint-expert", "ext_ses", "--approaches",
                "base:ext_ses,mint_shr,ew,ow_var,ow_cov,src,scr_ew,scr_var,scr_cov,occ_wlsv,occ_be",
                "--out", str(args.out / "imported")])
    raise SystemExit(code)


if __name__ == "__main__":
    main()
