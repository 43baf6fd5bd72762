from typing import Protocol

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.metrics.pairwise import cosine_similarity


class RelevanceScorer(Protocol):
    def score(self, query: str, documents: list[str]) -> list[float]: ...


class TfidfScorer:
    """Cosine similarity of TF-IDF term vectors, fitted on the documents.
    Scores are in [0, 1]."""

    def score(self, query: str, documents: list[str]) -> list[float]:
        if not documents:
            return []
        vectorizer = TfidfVectorizer()
        try:
            matrix = vectorizer.fit_transform(documents)
        except ValueError:  # empty vocabulary
            return [0.0] * len(documents)
        query_vector = vectorizer.transform([query])
        scores = cosine_similarity(query_vector, matrix)[0]
        return np.clip(scores, 0.0, 1.0).tolist()
