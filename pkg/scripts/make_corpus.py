#!/usr/bin/env python3
"""Write the synthetic demo corpus used by the example configs.

Usage: make_corpus.py <out.txt> [seed]
"""

import sys

from wmcollide.corpus import synthesize_corpus


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 7
    path = synthesize_corpus(sys.argv[1], seed=seed)
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
