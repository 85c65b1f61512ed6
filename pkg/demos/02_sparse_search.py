#!/usr/bin/env python3
"""BM25 over an inverted index, plus entity-concept query augmentation."""
from climafact import build_index, tokenize
from climafact.corpus import Document, PassageStore, segment_document
from climafact.linking import EntityMention, concept_terms

texts = [
    "the oceans absorb carbon dioxide and grow more acidic each decade",
    "solar cycles cannot explain the observed warming trend",
    "ice cores record greenhouse gas concentrations over millennia",
    "ocean acidification stresses coral reefs and shellfish",
    "model projections agree with the satellite temperature record",
]
passages = []
for i, text in enumerate(texts):
    passages.extend(segment_document(Document(f"d{i}", "", text), start_id=len(passages)))
store = PassageStore(passages, source_label="demo")

# The tokenizer lowercases and splits on anything non-alphanumeric; no
# stemming, stopwords kept.
print("tokenize('Earth\\'s 30-year Ice Age') ->", tokenize("Earth's 30-year Ice Age"))

index = build_index(store)
print(f"\nindex: {index.N} passages, {len(index.postings)} terms, avgdl={index.avgdl:.1f}")
print("postings for 'ocean':", index.postings["ocean"])

# Scores use idf = ln(1 + (N - df + 0.5)/(df + 0.5)) with k1=1.2, b=0.75.
for k, hits in [("ocean acid", index.search("ocean acid", k=3))]:
    print(f"\ntop-3 for {k!r}:")
    for hit in hits:
        print(f"  rank {hit.rank}  id {hit.passage_id}  score {hit.score:.4f}  "
              f"{store.get(hit.passage_id).text[:50]}...")

# Linked entities contribute extra query terms: the URI's final path segment,
# underscores split. (A live annotation service is optional; failures degrade
# to words-only retrieval.)
mentions = [EntityMention(surface="the oceans",
                          uri="http://dbpedia.org/resource/Ocean_acidification",
                          offset=0)]
extra = concept_terms(mentions)
print("\nconcept terms from the linked entity:", extra)
augmented = index.search("the oceans are fine", k=3, extra_terms=extra)
plain = index.search("the oceans are fine", k=3)
print("plain top hit:     ", plain[0].passage_id if plain else None)
print("augmented top hit: ", augmented[0].passage_id if augmented else None)
