"""Checking the identity corpus from Python instead of the CLI.

Each entry is an operator identity on the model kernel. Both sides are reduced
to exact canonical form for every index instance and compared with zero
tolerance. The report is the same structure `bergman-expansion verify --report`
writes.
"""

from bergman_expansion.corpus import load_corpus, run_corpus

entries, digest = load_corpus()
print(f"{len(entries)} entries, corpus sha256 {digest[:12]}")

# the filter is a glob over ids, so 4.17* also picks up 4.170-4.179
report = run_corpus(filter="4.17*")
for e in report["entries"]:
    print(f"{e['status'].upper():5} {e['id']:12} {e['mode']:10} {e['instances']} instances")
print(report["totals"])

# integrated entries also record one evaluated value as a sample
report = run_corpus(filter="4.24")
print(report["entries"][0].get("sample", {}))
