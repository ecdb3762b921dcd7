"""Article-related summary metrics: JS upper bound, sentence coverage and novel bigrams.

Tokenization is simple (NFKC, lowercase, whitespace split, edge
punctuation stripped) so values are comparable only within this package.
"""

import json
import math
import re
import unicodedata
from collections.abc import Iterable, Sequence

from nltk.tokenize import RegexpTokenizer, WhitespaceTokenizer
from nltk.util import bigrams
from pydantic import ValidationError

from app.exceptions import UndefinedMetricError
from app.schemas.metrics import DocumentMetrics, DocumentRecord, MetricsReport, SummaryScores
from app.utils.logging import get_logger

logger = get_logger(__name__)

_sentence_splitter = RegexpTokenizer(r"(?<=[.!?])\s+", gaps=True)
_word_splitter = WhitespaceTokenizer()
_edge_punctuation = re.compile(r"^[\W_]+|[\W_]+$")

Sentence = list[str]


def sentence_split(text: str) -> list[str]:
    """
    Split on '.', '!' or '?' followed by whitespace; empty fragments are dropped.

    Examples:
        >>> sentence_split("a b. c d!")
        ['a b.', 'c d!']
    """
    return [s.strip() for s in _sentence_splitter.tokenize(text) if s.strip()]


def tokenize(sentence: str) -> Sentence:
    """
    Lowercase NFKC tokens with leading and trailing punctuation stripped.

    Any non-word character counts as punctuation, so typographic quotes and
    dashes are stripped like their ASCII forms.

    Examples:
        >>> tokenize("The cat, sat.")
        ['the', 'cat', 'sat']
    """
    text = unicodedata.normalize("NFKC", sentence).lower()
    tokens = (_edge_punctuation.sub("", tok) for tok in _word_splitter.tokenize(text))
    return [tok for tok in tokens if tok]


def tokenize_text(text: str) -> list[Sentence]:
    """Sentence-split then tokenize; sentences with no tokens are dropped."""
    return [tokens for tokens in map(tokenize, sentence_split(text)) if tokens]


def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    """``|a ∩ b| / |a ∪ b|``; two empty sets score 0."""
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)


def js_upper_bound(summary: Sequence[Sentence], article: Sequence[Sentence]) -> float:
    """
    Mean over summary sentences of the best Jaccard similarity with any article sentence.

    Raises:
        UndefinedMetricError: empty summary
    """
    if not summary:
        raise UndefinedMetricError("JS is undefined for an empty summary")
    best = [max((jaccard(s, a) for a in article), default=0.0) for s in summary]
    return math.fsum(best) / len(best)


def sentence_coverage(generated: Sequence[Sentence], article: Sequence[Sentence], gold_js: float) -> float:
    """
    Mean number of article sentences whose Jaccard with a generated sentence exceeds ``gold_js``.

    Raises:
        UndefinedMetricError: empty generated summary
    """
    if not generated:
        raise UndefinedMetricError("SC is undefined for an empty summary")
    counts = [sum(jaccard(g, a) > gold_js for a in article) for g in generated]
    return sum(counts) / len(counts)


def _as_sentences(tokens: Sequence[str] | Sequence[Sentence]) -> list[Sentence]:
    if tokens and isinstance(tokens[0], str):
        return [list(tokens)]
    return [list(s) for s in tokens]


def novel_bigram_proportion(
    summary: Sequence[str] | Sequence[Sentence],
    article: Sequence[str] | Sequence[Sentence],
) -> float:
    """
    Fraction of summary bigram occurrences that never occur in the article.

    Bigrams do not cross sentence boundaries. Either argument may be one flat
    token list or a list of tokenized sentences. A summary without any bigram
    scores 0.
    """
    seen = {bg for sent in _as_sentences(article) for bg in bigrams(sent)}
    occurrences = [bg for sent in _as_sentences(summary) for bg in bigrams(sent)]
    if not occurrences:
        return 0.0
    return sum(bg not in seen for bg in occurrences) / len(occurrences)


def _mean(values: list[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


class MetricsService:
    """Scores documents and aggregates them into corpus reports."""

    def __init__(self):
        logger.info("MetricsService initialized")

    def score_summary(self, summary: str, article: list[Sentence], gold_js: float | None = None) -> SummaryScores:
        """
        JS, SC and NOVEL of one summary.

        SC uses ``gold_js`` as its threshold, or the summary's own JS when omitted.
        """
        sentences = tokenize_text(summary)
        js = js_upper_bound(sentences, article)
        threshold = js if gold_js is None else gold_js
        return SummaryScores(
            js=js,
            sc=sentence_coverage(sentences, article, threshold),
            novel=novel_bigram_proportion(sentences, article),
        )

    def score_document(self, record: DocumentRecord) -> DocumentMetrics:
        """
        Score the reference summary and, when present, the generated one.

        The reference's JS is the per-document threshold for SC.
        """
        article = tokenize_text(record.article)
        reference = self.score_summary(record.reference_summary, article)
        generated = None
        if record.generated_summary is not None:
            generated = self.score_summary(record.generated_summary, article, gold_js=reference.js)
        return DocumentMetrics(id=record.id, reference=reference, generated=generated)

    def corpus_report(self, records: Iterable[DocumentRecord | dict | str]) -> MetricsReport:
        """
        Macro-average document metrics over a corpus.

        Records may be parsed models, dicts or JSON lines. Unreadable records are
        reported in ``errors``; documents whose metrics are undefined are counted in
        ``skipped``. Both are passed over without stopping the run.
        """
        documents: list[DocumentMetrics] = []
        errors: list[str] = []
        skipped = 0

        for n, raw in enumerate(records, start=1):
            try:
                record = self._parse(raw)
            except (ValidationError, json.JSONDecodeError, TypeError) as e:
                logger.warning(f"Record {n} unreadable: {e}")
                errors.append(f"record {n}: {e}")
                continue
            try:
                documents.append(self.score_document(record))
            except UndefinedMetricError as e:
                logger.debug(f"Skipping document {record.id}: {e}")
                skipped += 1

        documents.sort(key=lambda d: (d.id, d.model_dump_json()))
        generated = [d.generated for d in documents if d.generated is not None]
        report = MetricsReport(
            js=_mean([g.js for g in generated]),
            sc=_mean([g.sc for g in generated]),
            novel=_mean([g.novel for g in generated]),
            reference_js=_mean([d.reference.js for d in documents]),
            reference_sc=_mean([d.reference.sc for d in documents]),
            reference_novel=_mean([d.reference.novel for d in documents]),
            documents=documents,
            evaluated=len(documents),
            skipped=skipped,
            errors=errors,
        )
        logger.info(
            f"📊 Metrics over {report.evaluated} documents ({report.skipped} skipped, {len(errors)} unreadable)"
        )
        return report

    @staticmethod
    def _parse(raw: DocumentRecord | dict | str) -> DocumentRecord:
        if isinstance(raw, DocumentRecord):
            return raw
        if isinstance(raw, str):
            raw = json.loads(raw)
        if not isinstance(raw, dict):
            raise TypeError(f"expected a JSON object, got {type(raw).__name__}")
        return DocumentRecord.model_validate(raw)


# Singleton instance
_metrics_service: MetricsService | None = None


def get_metrics_service() -> MetricsService:
    """Get or create metrics service instance."""
    global _metrics_service
    if _metrics_service is None:
        _metrics_service = MetricsService()
    return _metrics_service


def corpus_report(records: Iterable[DocumentRecord | dict | str]) -> MetricsReport:
    """Corpus report through the shared service."""
    return get_metrics_service().corpus_report(records)
