import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fairaoi.errors import ConfigurationError, DomainError
from fairaoi.semantics import (SemanticTriple, TripleSet, gram_schmidt, mean_payload_bits,
                               mean_similarity, payload_length, read_embeddings, read_triples,
                               similarity, write_embeddings)

CAR = SemanticTriple("car", "left of", "truck")


class TestPayload:
    def test_single_triple(self):
        assert payload_length(TripleSet([CAR])) == 15

    def test_additive(self):
        assert payload_length(TripleSet([CAR, CAR])) == 30

    def test_counts_code_points(self):
        t = SemanticTriple("café", "near", "señal")
        assert payload_length(TripleSet([t])) == 4 + 4 + 5

    @pytest.mark.parametrize("parts", [("car", "", "truck"), ("", "on", "road")])
    def test_empty_component(self, parts):
        with pytest.raises(ConfigurationError):
            SemanticTriple(*parts)

    def test_empty_set(self):
        with pytest.raises(ConfigurationError):
            TripleSet([])

    def test_mean_bits(self):
        assert mean_payload_bits([TripleSet([CAR])], 8) == 120
        ten = TripleSet([SemanticTriple("a", "bcdefghi", "j")])
        twenty = TripleSet([SemanticTriple("ab", "cdefghijklmnopq", "rst")])
        assert mean_payload_bits([ten, twenty], 8) == 120

    def test_mean_bits_random_sets(self, rng):
        sets, total = [], 0
        for _ in range(100):
            triples = []
            for _ in range(rng.integers(1, 6)):
                lens = rng.integers(1, 12, 3)
                triples.append(SemanticTriple(*("x" * int(n) for n in lens)))
                total += int(lens.sum())
            sets.append(TripleSet(triples))
        assert mean_payload_bits(sets, 8) == pytest.approx(8 * total / 100, rel=1e-15)

    def test_empty_list(self):
        with pytest.raises(DomainError):
            mean_payload_bits([], 8)


class TestSimilarity:
    def test_own_span(self):
        g = np.array([1.0, 2.0, 3.0])
        assert similarity([g], g) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert similarity([[1.0, 0, 0]], [0, 1.0, 0]) == 0.0

    def test_inside_span(self, rng):
        a, b = rng.normal(size=3), rng.normal(size=3)
        g = 0.3 * a - 1.7 * b
        # least-squares projection as independent reference
        basis = np.column_stack([a, b])
        coef, *_ = np.linalg.lstsq(basis, g, rcond=None)
        ref = np.linalg.norm(basis @ coef) / np.linalg.norm(g)
        assert similarity([a, b], g) == pytest.approx(ref, abs=1e-9)
        assert similarity([a, b], g) == pytest.approx(1.0, abs=1e-9)

    def test_matches_lstsq_in_general(self, rng):
        for _ in range(50):
            vecs = rng.normal(size=(3, 6))
            g = rng.normal(size=6)
            coef, *_ = np.linalg.lstsq(vecs.T, g, rcond=None)
            ref = np.linalg.norm(vecs.T @ coef) / np.linalg.norm(g)
            assert similarity(vecs, g) == pytest.approx(ref, abs=1e-10)

    def test_dependent_vectors_dropped(self):
        q = gram_schmidt([[1.0, 0, 0], [2.0, 0, 0], [1.0, 1.0, 0]])
        assert q.shape == (2, 3)

    def test_zero_graph(self):
        with pytest.raises(DomainError):
            similarity([[1.0, 0]], [0.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            similarity([[1.0, 0]], [1.0, 0.0, 0.0])

    @given(arrays(float, (4, 5), elements=st.floats(-10, 10)),
           arrays(float, 5, elements=st.floats(-10, 10)), st.floats(1e-3, 1e3))
    def test_bounded_and_scale_invariant(self, vecs, g, scale):
        if np.linalg.norm(g) < 1e-6:
            return
        s = similarity(vecs, g)
        assert 0.0 <= s <= 1.0
        assert similarity(vecs, scale * g) == pytest.approx(s, abs=1e-9)

    def test_bounded_many_random_sets(self, rng):
        for _ in range(10_000):
            k, d = rng.integers(1, 6), rng.integers(2, 8)
            s = similarity(rng.normal(size=(k, d)), rng.normal(size=d))
            assert 0.0 <= s <= 1.0

    @given(arrays(float, (5, 6), elements=st.floats(-5, 5)))
    def test_gram_schmidt_orthonormal(self, vecs):
        q = gram_schmidt(vecs)
        if len(q):
            assert np.abs(q @ q.T - np.eye(len(q))).max() < 1e-8


class TestMeanSimilarity:
    def test_values(self):
        assert mean_similarity([1, 1, 1], 3) == 1
        assert mean_similarity([0.5, 0.7], 10) == pytest.approx(0.6)

    def test_cap(self, rng):
        scores = rng.random(1000)
        assert mean_similarity(list(scores), 100) == pytest.approx(sum(scores[:100]) / 100)

    def test_empty(self):
        with pytest.raises(DomainError):
            mean_similarity([], 5)


class TestFiles:
    def test_triples_roundtrip(self, tmp_path):
        p = tmp_path / "t.tsv"
        p.write_text("car\tleft of\ttruck\n\nbus\tbehind\tcar\n", encoding="utf-8")
        ts = read_triples(p)
        assert ts.triples[1] == SemanticTriple("bus", "behind", "car")

    def test_bad_triple_line(self, tmp_path):
        p = tmp_path / "t.tsv"
        p.write_text("car left of truck\n")
        with pytest.raises(ConfigurationError):
            read_triples(p)

    def test_embeddings_roundtrip(self, tmp_path, rng):
        v = rng.normal(size=(3, 4))
        write_embeddings(tmp_path / "e.txt", v)
        assert np.array_equal(read_embeddings(tmp_path / "e.txt"), v)

    def test_embedding_dimension_checked(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("3\n1,2,3\n1,2\n")
        with pytest.raises(ConfigurationError):
            read_embeddings(p)
