import numpy as np
import pytest
from hypothesis import given, strategies as st

from shopsim.retrieval import (HashingEmbedder, build_index,
                               build_product_index, product_document,
                               query_top_k)

EMB = HashingEmbedder(dim=64)


class TestHashingEmbedder:
    def test_deterministic(self):
        a = EMB.embed("alpha beta gamma")
        b = EMB.embed("alpha beta gamma")
        assert np.array_equal(a, b)

    def test_unit_norm(self):
        assert np.linalg.norm(EMB.embed("some text here")) == pytest.approx(1.0)

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            EMB.embed("")

    @given(st.text(alphabet=st.characters(whitelist_categories=("Ll", "Nd"),
                                          max_codepoint=127), min_size=1))
    def test_norm_at_most_one(self, text):
        norm = float(np.linalg.norm(EMB.embed(text)))
        assert norm == pytest.approx(1.0) or norm == 0.0


class TestHandCase:
    """Five-document case with independently computed cosine scores.

    Tokens hash to distinct slots at dim=64 (verified when the constants
    were derived), so the geometry is exactly: d0=(1,1,1)/sqrt(3) over
    {alpha,beta,gamma}, d1=(1,1)/sqrt(2), d4=(2,1)/sqrt(5), query=(1,1)/sqrt(2).
    """

    DOCS = [
        ("d0", "alpha beta gamma"),
        ("d1", "alpha beta"),
        ("d2", "gamma delta"),
        ("d3", "epsilon zeta"),
        ("d4", "alpha alpha beta"),
    ]
    # Frozen oracle values: 2/sqrt(6), 1, 0, 0, 3/sqrt(10).
    EXPECTED = {
        "d0": 0.816496580927726,
        "d1": 0.9999999999999998,
        "d2": 0.0,
        "d3": 0.0,
        "d4": 0.9486832980505137,
    }

    def test_scores_to_1e12(self):
        index = build_index(self.DOCS, "test", "products", EMB)
        result = query_top_k(index, "alpha beta", k=5, embedder=EMB)
        assert result.doc_ids() == ["d1", "d4", "d0", "d2", "d3"]
        for doc_id, score in result.ranked:
            assert score == pytest.approx(self.EXPECTED[doc_id], abs=1e-12)

    def test_top_k_truncates(self):
        index = build_index(self.DOCS, "test", "products", EMB)
        result = query_top_k(index, "alpha beta", k=2, embedder=EMB)
        assert result.doc_ids() == ["d1", "d4"]

    def test_ties_break_by_insertion_order(self):
        docs = [("first", "omega"), ("second", "omega"), ("third", "omega")]
        index = build_index(docs, "test", "products", EMB)
        result = query_top_k(index, "omega", k=3, embedder=EMB)
        assert result.doc_ids() == ["first", "second", "third"]


class TestSelfQuery:
    def test_every_product_ranks_itself_first(self, catalog):
        for category in catalog.categories:
            index = build_product_index(catalog, category, EMB)
            for product in catalog.products(category):
                result = query_top_k(index, product_document(product), k=1,
                                     embedder=EMB)
                assert result.doc_ids() == [product.name], (
                    f"{product.name} did not rank first for its own document")


class TestIndexContracts:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            build_index([("a", "x"), ("a", "y")], "c", "products", EMB)

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            build_index([("a", "")], "c", "products", EMB)

    def test_empty_index_empty_result(self):
        index = build_index([], "c", "products", EMB)
        assert query_top_k(index, "anything", k=4, embedder=EMB).ranked == ()

    def test_k_must_be_positive(self):
        index = build_index([("a", "x")], "c", "products", EMB)
        with pytest.raises(ValueError):
            query_top_k(index, "x", k=0, embedder=EMB)
