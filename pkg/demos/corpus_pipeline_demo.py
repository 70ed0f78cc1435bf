#!/usr/bin/env python3
"""Walk through corpus harmonization: three raw sources in three formats
become one deduplicated, balanced, split corpus.

Run:  python demos/corpus_pipeline_demo.py
"""

import json
import random

from urdufnd import harmonize as hz
from urdufnd.corpus import compute_stats

rng = random.Random(2024)
LETTERS = "ابپتٹثجچحخدڈرزسشصطعغفقکگلمنوہیے"


def sentence(n=12):
    return " ".join(
        "".join(rng.choice(LETTERS) for _ in range(rng.randint(3, 7))) for _ in range(n)
    )


# --- 1. Three sources, three formats, three labeling schemes ---------------
csv_payload = "body,verdict,section\n"
for i in range(40):
    csv_payload += f"{sentence()},{'fake' if i % 2 else 'real'},politics\n"

json_payload = json.dumps([
    {"text": sentence(), "rating": rng.choice(["true", "half true", "pants-on-fire"]),
     "topic": "Health"}
    for _ in range(30)
], ensure_ascii=False)

xml_payload = "<news>" + "".join(
    f"<item><body>{sentence()}</body><tag>{'جعلی' if i % 3 else 'اصلی'}</tag></item>"
    for i in range(30)
) + "</news>"

manifests = [
    (hz.SourceManifest(
        source_id="csv-wire", format=hz.SourceFormat.DELIMITED_TABLE,
        field_map={"text": "body", "label": "verdict", "domain": "section"},
        label_map={"fake": "fake", "real": "legit"},
    ), csv_payload.encode()),
    (hz.SourceManifest(
        source_id="factcheck-api", format=hz.SourceFormat.TREE_STRUCTURED,
        field_map={"text": "text", "label": "rating", "domain": "topic"},
        label_map=dict(hz.DEFAULT_LABEL_MAP),
    ), json_payload.encode()),
    (hz.SourceManifest(
        source_id="archive-xml", format=hz.SourceFormat.MARKUP,
        field_map={"text": "body", "label": "tag"},
        label_map={"جعلی": "fake", "اصلی": "legit"},
    ), xml_payload.encode()),
]

ingested = []
for manifest, payload in manifests:
    result = hz.ingest_source(manifest, payload)
    print(f"ingested {len(result.records):3d} records from {manifest.source_id} "
          f"({result.dropped} dropped)")
    ingested.append(result.records)

# --- 2. Fuse: validate, resolve id collisions, deduplicate ------------------
records, report = hz.fuse(ingested)
print(f"\nfused corpus: {len(records)} records "
      f"({report.exact_removed} exact dups, {report.near_removed} near dups removed)")

# --- 3. Balance domains and split -------------------------------------------
records = hz.balance_domains(records, hz.BalancePolicy(max_per_domain=40), seed=7)
split = hz.stratified_split(records, train_ratio=0.8, seed=7)
train, test = hz.split_records(records, split)
print(f"after balancing: {len(records)} records -> {len(train)} train / {len(test)} test")

# --- 4. Corpus statistics ----------------------------------------------------
stats = compute_stats(records, top_k=5)
print(f"\ntotal words: {stats.total_words}, per-class unique: {stats.unique_words}, "
      f"shared vocabulary: {stats.shared_vocabulary}")
print("top fake-class terms:", stats.top_terms["fake"])
