"""Product inventory and shopper persona loading, validation, and name resolution.

Catalog and Persona values are immutable after load and safe to share
read-only across concurrent simulations.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import IO, Any, Mapping

from .errors import CatalogValidationError, SchemaError

__all__ = [
    "Product",
    "Persona",
    "Criterion",
    "Catalog",
    "parse_money",
    "format_money",
    "normalize_name",
    "load_catalog",
    "load_personas",
    "resolve_product_name",
    "match_in_names",
]


def parse_money(value: Any) -> int:
    """Parse a price into integer minor currency units (cents).

    Accepts strings like ``"$1,800.00"`` as well as bare ints/floats
    denominated in dollars. Negative amounts are rejected.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a money value: {value!r}")
    if isinstance(value, int):
        cents = value * 100
    elif isinstance(value, float):
        cents = round(value * 100)
    elif isinstance(value, str):
        cleaned = value.strip().replace("$", "").replace(",", "").replace(" ", "")
        if not cleaned:
            raise ValueError("empty money string")
        try:
            cents = int((Decimal(cleaned) * 100).to_integral_value())
        except InvalidOperation as exc:
            raise ValueError(f"unparseable money string: {value!r}") from exc
    else:
        raise ValueError(f"not a money value: {value!r}")
    if cents < 0:
        raise ValueError(f"negative price: {value!r}")
    return cents


def format_money(cents: int) -> str:
    """Render minor units back to the ``"$1,800.00"`` document form."""
    return f"${cents / 100:,.2f}"


_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def normalize_name(name: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return _NON_ALNUM.sub(" ", name.lower()).strip()


# Small closed-class word list used when deriving persona criteria. Content
# words are everything else.
_STOPWORDS = frozenset("""
a an and are as at be but by for from has have i im in is it its me my of on
or so that the their they this to under up was we will with would you your
must requires require prefers prefer priorit prioritizes values value needs
need am s
""".split())

_TOKEN = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def content_words(text: str) -> frozenset[str]:
    return frozenset(t for t in tokenize(text) if t not in _STOPWORDS)


@dataclass(frozen=True)
class Product:
    name: str
    price: int  # minor units
    description: str
    features: tuple[str, ...]
    category: str
    image_ref: str | None = None
    url: str | None = None

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "name": self.name,
            "price": format_money(self.price),
            "description": self.description,
            "features": list(self.features),
        }
        if self.image_ref is not None:
            doc["image"] = self.image_ref
        if self.url is not None:
            doc["url"] = self.url
        return doc


@dataclass(frozen=True)
class Criterion:
    """One disclosed-criteria unit derived from a persona at load time."""

    label: str
    words: frozenset[str]


@dataclass(frozen=True)
class Persona:
    name: str
    age: int
    category: str
    budget: int  # minor units
    background: str
    preferences: str
    dealbreakers: str
    acceptable_products: tuple[str, ...]
    criteria: tuple[Criterion, ...] = field(default=(), compare=False)

    @property
    def infeasible(self) -> bool:
        return not self.acceptable_products

    def to_doc(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "age": self.age,
            "category": self.category,
            "budget": self.budget / 100 if self.budget % 100 else self.budget // 100,
            "persona_background": self.background,
            "preferences": self.preferences,
            "dealbreakers": self.dealbreakers,
            "acceptable_products": list(self.acceptable_products),
        }


_CLAUSE_SPLIT = re.compile(r"[.;!?\n]+|\band\b|,")


def derive_criteria(persona_budget: int, preferences: str, dealbreakers: str) -> tuple[Criterion, ...]:
    """Fix the criterion inventory for a persona.

    One criterion for the budget, plus one per attribute clause split from the
    preferences and dealbreakers strings on sentence / ";" / "," / "and"
    boundaries. Clauses with no content words are dropped. The inventory is
    computed once at load so downstream counting is deterministic.
    """
    budget_amount = persona_budget // 100 if persona_budget % 100 == 0 else persona_budget / 100
    crits: list[Criterion] = [
        Criterion("budget", frozenset({"budget", str(budget_amount), f"{budget_amount:,}"}))
    ]
    seen: set[frozenset[str]] = set()
    for source in (preferences, dealbreakers):
        for clause in _CLAUSE_SPLIT.split(source):
            words = content_words(clause)
            if not words or words in seen:
                continue
            seen.add(words)
            crits.append(Criterion(clause.strip(), words))
    return tuple(crits)


@dataclass(frozen=True)
class Catalog:
    categories: Mapping[str, tuple[Product, ...]]
    buying_guides: Mapping[str, tuple[str, ...]]

    def products(self, category: str) -> tuple[Product, ...]:
        try:
            return self.categories[category]
        except KeyError:
            raise CatalogValidationError(f"unknown category: {category!r}") from None

    def guides(self, category: str) -> tuple[str, ...]:
        return self.buying_guides.get(category, ())

    def serialize(self) -> dict[str, Any]:
        return {
            "categories": {
                cat: [p.to_doc() for p in prods]
                for cat, prods in self.categories.items()
            },
            "buying_guides": {cat: list(gs) for cat, gs in self.buying_guides.items()},
        }


def _read_document(source: str | Path | IO[str] | Mapping[str, Any]) -> Any:
    if isinstance(source, Mapping):
        return source
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return json.load(fh)
    return json.load(source)


def _require(record: Mapping[str, Any], field_name: str, record_label: str) -> Any:
    if field_name not in record or record[field_name] is None:
        raise SchemaError(
            f"record {record_label}: missing field {field_name!r}",
            record=record_label, field=field_name,
        )
    return record[field_name]


def _parse_product(raw: Mapping[str, Any], category: str, position: int) -> Product:
    label = f"{category}[{position}]"
    name = _require(raw, "name", label)
    if not isinstance(name, str) or not name.strip():
        raise SchemaError(f"record {label}: empty field 'name'", record=label, field="name")
    label = f"{category}/{name}"
    try:
        price = parse_money(_require(raw, "price", label))
    except ValueError as exc:
        raise SchemaError(f"record {label}: bad field 'price': {exc}",
                          record=label, field="price") from exc
    description = _require(raw, "description", label)
    features = _require(raw, "features", label)
    if not isinstance(features, (list, tuple)):
        raise SchemaError(f"record {label}: field 'features' must be a list",
                          record=label, field="features")
    return Product(
        name=name,
        price=price,
        description=str(description),
        features=tuple(str(f) for f in features),
        category=category,
        image_ref=raw.get("image"),
        url=raw.get("url"),
    )


def load_catalog(source: str | Path | IO[str] | Mapping[str, Any]) -> Catalog:
    """Load and validate a product inventory document.

    The document maps ``categories`` to lists of product records using the
    field names name/price/description/features/image/url. Duplicate product
    names within a category are rejected.
    """
    doc = _read_document(source)
    if not isinstance(doc, Mapping):
        raise SchemaError("catalog document must be an object")
    raw_categories = doc.get("categories", doc if "buying_guides" not in doc else {})
    if not isinstance(raw_categories, Mapping):
        raise SchemaError("'categories' must map category ids to product lists",
                          field="categories")
    categories: dict[str, tuple[Product, ...]] = {}
    for cat, raw_products in raw_categories.items():
        if not isinstance(raw_products, list):
            raise SchemaError(f"category {cat!r} must hold a list of products",
                              record=cat)
        products = tuple(_parse_product(p, cat, i) for i, p in enumerate(raw_products))
        seen: set[str] = set()
        for p in products:
            if p.name in seen:
                raise CatalogValidationError(
                    f"duplicate product name {p.name!r} in category {cat!r}")
            seen.add(p.name)
        categories[cat] = products
    raw_guides = doc.get("buying_guides", {})
    guides = {cat: tuple(str(g) for g in gs) for cat, gs in raw_guides.items()}
    return Catalog(categories=categories, buying_guides=guides)


def load_personas(source: str | Path | IO[str] | list[Mapping[str, Any]],
                  catalog: Catalog) -> list[Persona]:
    """Load personas and resolve each acceptable product against the catalog.

    An empty ``acceptable_products`` list is a valid, infeasible persona. An
    entry that does not resolve to exactly one product in the persona's
    category is a validation error naming both persona and product.
    """
    doc = source if isinstance(source, list) else _read_document(source)
    if isinstance(doc, Mapping) and "personas" in doc:
        doc = doc["personas"]
    if not isinstance(doc, list):
        raise SchemaError("persona document must be a list of persona records")
    personas: list[Persona] = []
    for i, raw in enumerate(doc):
        label = f"persona[{i}]"
        name = _require(raw, "name", label)
        label = f"persona {name!r}"
        category = _require(raw, "category", label)
        if category not in catalog.categories:
            raise CatalogValidationError(
                f"{label}: category {category!r} not in catalog")
        try:
            budget = parse_money(_require(raw, "budget", label))
        except ValueError as exc:
            raise SchemaError(f"{label}: bad field 'budget': {exc}",
                              record=label, field="budget") from exc
        acceptable_raw = raw.get("acceptable_products", [])
        if not isinstance(acceptable_raw, list):
            raise SchemaError(f"{label}: 'acceptable_products' must be a list",
                              record=label, field="acceptable_products")
        resolved: list[str] = []
        for mention in acceptable_raw:
            product = resolve_product_name(mention, category, catalog)
            if product is None:
                raise CatalogValidationError(
                    f"{label}: acceptable product {mention!r} does not resolve "
                    f"to exactly one product in category {category!r}")
            resolved.append(product.name)
        preferences = str(raw.get("preferences", ""))
        dealbreakers = str(raw.get("dealbreakers", ""))
        personas.append(Persona(
            name=str(name),
            age=int(_require(raw, "age", label)),
            category=category,
            budget=budget,
            background=str(raw.get("persona_background", "")),
            preferences=preferences,
            dealbreakers=dealbreakers,
            acceptable_products=tuple(resolved),
            criteria=derive_criteria(budget, preferences, dealbreakers),
        ))
    return personas


def match_in_names(mention: str, names: list[str] | tuple[str, ...]) -> str | None:
    """Two-tier name match over a list of candidate names.

    Exact normalized equality wins outright; otherwise a unique containment
    match (either direction) is accepted. Zero or ambiguous candidates yield
    no match.
    """
    norm = normalize_name(mention)
    if not norm:
        return None
    exact = [n for n in names if normalize_name(n) == norm]
    if len(exact) == 1:
        return exact[0]
    if len(exact) > 1:
        return None
    contained = [
        n for n in names
        if norm in normalize_name(n) or normalize_name(n) in norm
    ]
    if len(contained) == 1:
        return contained[0]
    return None


def resolve_product_name(mention: str, category: str, catalog: Catalog) -> Product | None:
    """Resolve a free-text product mention within a category.

    Returns the unique product whose normalized name equals, contains, or is
    contained by the normalized mention; ambiguity resolves to no match.
    """
    products = catalog.products(category)
    matched = match_in_names(mention, [p.name for p in products])
    if matched is None:
        return None
    return next(p for p in products if p.name == matched)
