"""Pydantic schemas for summary metric inputs and reports."""

from pydantic import BaseModel, ConfigDict, Field, field_validator


class DocumentRecord(BaseModel):
    """One corpus line: an article, its reference summary and an optional generated summary."""

    model_config = ConfigDict(populate_by_name=True)

    id: str
    article: str
    reference_summary: str = Field(alias="summary")
    generated_summary: str | None = Field(default=None, alias="generated")

    @field_validator("id", mode="before")
    @classmethod
    def _coerce_id(cls, value: object) -> str:
        return str(value)

    @field_validator("article", "reference_summary")
    @classmethod
    def _check_nonempty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("must not be empty")
        return value


class SummaryScores(BaseModel):
    """JS, SC and NOVEL of one summary against its article."""

    js: float = Field(ge=0, le=1, description="Jaccard similarity upper bound")
    sc: float = Field(ge=0, description="Mean count of covered article sentences")
    novel: float = Field(ge=0, le=1, description="Proportion of novel bigrams")


class DocumentMetrics(BaseModel):
    """Metrics of one document; ``generated`` is absent when the record has no generated summary."""

    id: str
    reference: SummaryScores
    generated: SummaryScores | None = None


class MetricsReport(BaseModel):
    """Macro-averaged corpus metrics with the per-document breakdown."""

    js: float | None = Field(default=None, ge=0, le=1)
    sc: float | None = Field(default=None, ge=0)
    novel: float | None = Field(default=None, ge=0, le=1)
    reference_js: float | None = Field(default=None, ge=0, le=1)
    reference_sc: float | None = Field(default=None, ge=0)
    reference_novel: float | None = Field(default=None, ge=0, le=1)
    documents: list[DocumentMetrics] = []
    evaluated: int = 0
    skipped: int = 0
    errors: list[str] = []
