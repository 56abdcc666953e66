#!/usr/bin/env python3
"""Download a small corpus of classic PDB entries from RCSB.

The test fixtures shipped in tests/fixtures/corpus are synthetic, so the
suite runs without network access.  This script fetches real structures
(ubiquitin included) for anyone who wants to rebuild a store from actual
crystallographic and NMR data:

    python3 scripts/fetch_real_corpus.py ./real_corpus
    torsionmine ingest ./real_corpus --store ./real_db
    torsionmine predict MQIFVKTLTGKTITLEVEPSDTIENVKAKIQDKEGIPPDQQRLIFAGKQLEDGRTLSDYNIQKESTLHLVLRLRGG \
        --k 7 --store ./real_db --out ./pred

Downloads are sequential with a polite delay; already-present files are
skipped, so the script can resume after interruption.
"""

import argparse
import sys
import time
import urllib.error
import urllib.request
from pathlib import Path

# Well-known, mostly small entries spanning X-ray and NMR methods and a
# broad fold variety.  Ubiquitin (1UBQ) first.
DEFAULT_IDS = """
1UBQ 1UBI 1D3Z 4HHB 2HHB 1HHO 1MBN 1MBO 2LYZ 1LYZ
6LYZ 1HEL 1AKI 1LZ1 2LZM 3LZM 1CRN 5PTI 4PTI 6PTI
1BPI 1TIM 1PCY 1PLC 2PCY 3ICB 4ICB 1CTF 2TRX 256B
1CYO 5CYT 1HRC 2CYP 4DFR 3ADK 4AKE 1AKE 2GRS 2PRK
4PEP 2PTN 1TLD 4CHA 3EST 1PPB 2ALP 1SGT 2SGA 2PTC
1FX1 4FXN 3FXC 1FDX 2RN2 7RSA 5RSA 3RN3 1A2P 2SNS
1STN 1SNC 1ROP 1LMB 1R69 1PGB 2GB1 1SHG 1TEN 1FKB
2CI2 1CSE 2OVO 1PPF 1REI 7FAB 1MCP 2RHE 1ECA 1GCN
1INS 4INS 1PPT 2MLT 1CC5 451C 1AZU 2AZA 1BP2 2ACT
9PAP 1SN3 1NXB 1HOE 2EBX 1CA2 2CAB 1ACX 2CDV 3GAP
2WRP 2CCY 1UTG 1PAZ 2MHR 2PAB 3TLN 5CPA 2CPP 2SOD
""".split()

BASE_URL = "https://files.rcsb.org/download"


def fetch(pdb_id: str, dest: Path, base_url: str, timeout: float) -> bool:
    url = f"{base_url}/{pdb_id.upper()}.pdb.gz"
    target = dest / f"{pdb_id.lower()}.pdb.gz"
    if target.exists():
        print(f"  {pdb_id}: already present")
        return True
    try:
        with urllib.request.urlopen(url, timeout=timeout) as response:
            data = response.read()
    except (urllib.error.URLError, OSError) as exc:
        print(f"  {pdb_id}: FAILED ({exc})", file=sys.stderr)
        return False
    target.write_bytes(data)
    print(f"  {pdb_id}: {len(data)} bytes")
    return True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("dest", nargs="?", default="real_corpus",
                        help="output directory (default ./real_corpus)")
    parser.add_argument("--ids-file",
                        help="file with one PDB id per line, replacing the "
                             "built-in list")
    parser.add_argument("--base-url", default=BASE_URL)
    parser.add_argument("--sleep", type=float, default=0.25,
                        help="delay between downloads in seconds")
    parser.add_argument("--timeout", type=float, default=30.0)
    args = parser.parse_args(argv)

    ids = DEFAULT_IDS
    if args.ids_file:
        ids = [line.strip() for line in Path(args.ids_file).read_text().splitlines()
               if line.strip() and not line.startswith("#")]

    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    print(f"fetching {len(ids)} entries into {dest}")
    ok = 0
    for i, pdb_id in enumerate(ids):
        ok += fetch(pdb_id, dest, args.base_url, args.timeout)
        if i + 1 < len(ids):
            time.sleep(args.sleep)
    print(f"done: {ok}/{len(ids)} files available")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
