"""Category-scoped top-k retrieval with the deterministic hashing embedder."""

from pathlib import Path

from shopsim import HashingEmbedder, build_product_index, load_catalog, query_top_k

FIXTURES = Path(__file__).parent.parent / "tests" / "fixtures"

catalog = load_catalog(FIXTURES / "catalog.json")
embedder = HashingEmbedder()
index = build_product_index(catalog, "smart_watch", embedder)

for query in ("cheap watch with gps for running",
              "solar charging long battery for backpacking"):
    result = query_top_k(index, query, k=4, embedder=embedder)
    print(f"query: {query!r}")
    for name, score in result.ranked:
        print(f"  {score:.4f}  {name}")
    print()
