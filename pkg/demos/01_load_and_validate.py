"""Load the bundled catalog and personas, and poke at the data model."""

from pathlib import Path

from shopsim import load_catalog, load_personas
from shopsim.catalog import format_money, resolve_product_name

FIXTURES = Path(__file__).parent.parent / "tests" / "fixtures"

catalog = load_catalog(FIXTURES / "catalog.json")
personas = load_personas(FIXTURES / "personas.json", catalog)

print(f"{sum(len(catalog.products(c)) for c in catalog.categories)} products "
      f"across {len(catalog.categories)} categories; {len(personas)} personas")

crystal = next(p for p in personas if p.name == "Crystal")
print(f"\n{crystal.name} ({crystal.category}), budget {format_money(crystal.budget)}")
print(f"  acceptable: {', '.join(crystal.acceptable_products)}")
print(f"  criteria fixed at load: {[c.label for c in crystal.criteria]}")

# Mentions resolve through exact match first, then unique containment, so a
# clipped product name from a chat transcript still lands on one product.
hit = resolve_product_name("Platinum Mixed Metal Perfect Fit Solitaire",
                           "rings", catalog)
print(f"\ntruncated mention resolves to: {hit.name}")

infeasible = [p.name for p in personas if p.infeasible]
print(f"infeasible personas (correct behavior is to exit): {infeasible}")
