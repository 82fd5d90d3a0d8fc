"""Pre-tokenized corpus loading, vocabulary, and frequency statistics."""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse


class EmptyCorpusError(ValueError):
    pass


class EmptyStatsError(ValueError):
    pass


@dataclass
class Document:
    id: int
    tokens: np.ndarray  # term ids, in order


class Corpus:
    """Documents plus a dense term-string <-> term-id vocabulary.

    Per-term integrity scores default to 1.0 when no score file is given.
    Immutable after construction.
    """

    def __init__(self, documents, vocab, integrity=None):
        self.documents = documents
        self.vocab = list(vocab)  # id -> string
        self.index = {t: i for i, t in enumerate(self.vocab)}
        if integrity is None:
            integrity = np.ones(len(self.vocab))
        self.integrity = np.asarray(integrity, dtype=np.float64)
        self._postings = None

    @property
    def num_terms(self):
        return len(self.vocab)

    @property
    def num_docs(self):
        return len(self.documents)

    def term(self, term_id):
        return self.vocab[term_id]

    def term_id(self, term):
        return self.index[term]

    def docs_containing(self, term_id):
        """Sorted array of ids of documents containing the term."""
        if self._postings is None:
            postings = [[] for _ in self.vocab]
            for doc in self.documents:
                for t in np.unique(doc.tokens):
                    postings[t].append(doc.id)
            self._postings = [np.asarray(p, dtype=np.int64) for p in postings]
        return self._postings[term_id]


def load_corpus(path, integrity_path=None) -> Corpus:
    """Load a whitespace-tokenized corpus, one document per non-empty line.

    Multi-word phrases are expected pre-joined with underscores; this never
    splits or normalizes tokens.
    """
    with open(path, encoding="utf-8") as f:
        lines = f.readlines()
    return corpus_from_lines(lines, integrity_path=integrity_path)


def corpus_from_lines(lines, integrity_path=None) -> Corpus:
    vocab = []
    index = {}
    documents = []
    for line in lines:
        tokens = line.split()
        if not tokens:
            continue
        ids = np.empty(len(tokens), dtype=np.int64)
        for k, tok in enumerate(tokens):
            tid = index.get(tok)
            if tid is None:
                tid = len(vocab)
                index[tok] = tid
                vocab.append(tok)
            ids[k] = tid
        documents.append(Document(id=len(documents), tokens=ids))
    if not documents:
        raise EmptyCorpusError("corpus contains no non-empty documents")
    integrity = None
    if integrity_path is not None:
        integrity = np.ones(len(vocab))
        with open(integrity_path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                term, score = line.split("\t")
                if term in index:
                    integrity[index[term]] = float(score)
    return Corpus(documents, vocab, integrity)


@dataclass
class TermStats:
    """Term/document frequency statistics over one document subset."""

    doc_ids: np.ndarray          # sorted subset doc ids
    row_of: dict                 # doc id -> row in counts
    counts: sparse.csr_matrix    # (n_subset_docs, vocab) term counts
    df: np.ndarray               # document frequency over the subset
    idf: np.ndarray              # log(n/df); 0 where df == 0 (term absent)
    doc_len: np.ndarray          # per subset row
    avg_doc_len: float
    n_docs: int
    in_subset: np.ndarray = field(default=None)  # bool mask: df > 0

    def tf(self, term_id, doc_id):
        return int(self.counts[self.row_of[doc_id], term_id])

    def subcorpus_tf(self, term_id, doc_ids):
        """Total occurrences of a term over a set of subset documents."""
        rows = [self.row_of[d] for d in doc_ids]
        return int(self.counts[rows, term_id].sum()) if rows else 0


def compute_term_stats(corpus: Corpus, doc_subset) -> TermStats:
    """Frequency statistics restricted to doc_subset.

    idf(t) = log(|subset| / df(t)) with df over the subset only; terms absent
    from the subset get df 0 and idf 0 (flagged by in_subset).
    """
    doc_ids = np.asarray(sorted(doc_subset), dtype=np.int64)
    if doc_ids.size == 0:
        raise EmptyStatsError("document subset is empty")
    rows, cols, vals = [], [], []
    doc_len = np.empty(doc_ids.size, dtype=np.int64)
    for r, d in enumerate(doc_ids):
        tokens = corpus.documents[d].tokens
        doc_len[r] = tokens.size
        uniq, cnt = np.unique(tokens, return_counts=True)
        rows.append(np.full(uniq.size, r, dtype=np.int64))
        cols.append(uniq)
        vals.append(cnt)
    counts = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(doc_ids.size, corpus.num_terms),
        dtype=np.float64,
    )
    df = np.asarray((counts > 0).sum(axis=0)).ravel()
    idf = np.zeros(corpus.num_terms)
    present = df > 0
    idf[present] = np.log(doc_ids.size / df[present])
    return TermStats(
        doc_ids=doc_ids,
        row_of={int(d): r for r, d in enumerate(doc_ids)},
        counts=counts,
        df=df,
        idf=idf,
        doc_len=doc_len,
        avg_doc_len=float(doc_len.mean()),
        n_docs=int(doc_ids.size),
        in_subset=present,
    )


def context_pairs(doc: Document, window: int):
    """All (target, context) pairs within the window, both directions."""
    if window < 1:
        raise ValueError("window must be >= 1")
    tokens = doc.tokens
    pairs = []
    n = tokens.size
    for i in range(n):
        lo = max(0, i - window)
        hi = min(n, i + window + 1)
        for j in range(lo, hi):
            if j != i:
                pairs.append((int(tokens[i]), int(tokens[j])))
    return pairs


def context_pair_arrays(documents, window: int):
    """Vectorized context pairs over many documents: (targets, contexts)."""
    t_parts, c_parts = [], []
    for doc in documents:
        tokens = doc.tokens
        for k in range(1, window + 1):
            if tokens.size <= k:
                break
            a, b = tokens[:-k], tokens[k:]
            t_parts.extend((a, b))
            c_parts.extend((b, a))
    if not t_parts:
        return (np.empty(0, dtype=np.int64),) * 2
    return np.concatenate(t_parts), np.concatenate(c_parts)
