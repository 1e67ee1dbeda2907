"""Question-set evaluation harness with human star ratings.

Runs an ordered question list through the conversational chain under one
or more model profiles, recording answers, latency and an automated
containment proxy score. Star ratings stay human-entered: the harness
stores them (via :func:`annotate_rating`) and aggregates them, but never
invents them. Follow-up questions run in the same chat session as the
question they follow; independent questions each get a fresh session.
"""

from __future__ import annotations

import json
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .conversation import ChatSession, ModelProfile, answer_turn, make_llm_client
from .embedding import Embedder, tokenize
from .errors import (
    DimensionMismatch,
    LlmUnavailable,
    RatingOutOfRange,
    RemoteUnavailable,
    UnknownRecord,
)
from .vector_index import VectorIndex


@dataclass(frozen=True)
class EvalQuestion:
    qid: int
    prompt: str
    is_followup: bool = False
    reference_answer: str = ""
    follows: int | None = None

    def __post_init__(self):
        if self.is_followup and (self.follows is None or self.follows >= self.qid):
            raise ValueError(f"qid {self.qid}: follow-up must name an earlier question")


@dataclass
class EvalRecord:
    qid: int
    profile_id: str
    answer: str
    sources: list[dict]
    containment: float
    latency_ms: float
    session_id: str
    rating: int | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "qid": self.qid,
            "profile_id": self.profile_id,
            "answer": self.answer,
            "sources": self.sources,
            "containment": self.containment,
            "latency_ms": self.latency_ms,
            "session_id": self.session_id,
            "rating": self.rating,
            "error": self.error,
        }


@dataclass
class EvalReport:
    run_id: str
    profile_ids: list[str]
    records: list[EvalRecord] = field(default_factory=list)

    def aggregates(self) -> dict[str, dict]:
        """Per-profile mean rating (rated records only) and mean containment."""
        out: dict[str, dict] = {}
        for profile_id in self.profile_ids:
            rows = [r for r in self.records if r.profile_id == profile_id]
            rated = [r.rating for r in rows if r.rating is not None]
            out[profile_id] = {
                "mean_rating": sum(rated) / len(rated) if rated else None,
                "mean_containment": sum(r.containment for r in rows) / len(rows) if rows else 0.0,
            }
        return out

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "profile_ids": self.profile_ids,
            "records": [r.to_dict() for r in self.records],
            "aggregates": self.aggregates(),
        }


def containment_score(answer: str, reference: str) -> float:
    """Fraction of reference tokens present in the answer (both lowercased sets)."""
    ref_tokens = set(tokenize(reference))
    ans_tokens = set(tokenize(answer))
    if not ref_tokens:
        return 1.0 if not ans_tokens else 0.0
    return len(ref_tokens & ans_tokens) / len(ref_tokens)


def _eval_one_profile(profile: ModelProfile, ordered: Sequence[EvalQuestion],
                      index: VectorIndex, embedder: Embedder, k: int,
                      max_history_turns: int, timer: Callable[[], float]) -> list[EvalRecord]:
    llm = make_llm_client(profile)
    sessions: dict[int, ChatSession] = {}
    records: list[EvalRecord] = []
    for question in ordered:
        if question.is_followup and question.follows in sessions:
            session = sessions[question.follows]
        else:
            session = ChatSession(
                session_id=f"{profile.profile_id}/q{question.qid}",
                model_profile_id=profile.profile_id,
                max_history_turns=max_history_turns,
            )
        sessions[question.qid] = session

        started = timer()
        try:
            result = answer_turn(session, question.prompt, index, embedder, llm, k=k)
        except (LlmUnavailable, RemoteUnavailable, DimensionMismatch) as exc:
            records.append(EvalRecord(
                qid=question.qid,
                profile_id=profile.profile_id,
                answer="",
                sources=[],
                containment=0.0,
                latency_ms=round((timer() - started) * 1000.0, 3),
                session_id=session.session_id,
                error=str(exc),
            ))
            continue
        records.append(EvalRecord(
            qid=question.qid,
            profile_id=profile.profile_id,
            answer=result.answer,
            sources=[s.to_dict() for s in result.sources],
            containment=containment_score(result.answer, question.reference_answer),
            latency_ms=round((timer() - started) * 1000.0, 3),
            session_id=session.session_id,
        ))
    return records


def run_eval(questions: Sequence[EvalQuestion], profiles: Sequence[ModelProfile],
             index: VectorIndex, embedder: Embedder, k: int = 4,
             max_history_turns: int = 10,
             timer: Callable[[], float] = time.perf_counter,
             run_id: str | None = None, parallel: bool = False) -> EvalReport:
    """Answer every question under every profile and collect the records.

    Client errors are recorded on the failing question's record and the
    run continues. ``timer`` is injectable so offline runs can produce
    byte-stable reports. Profiles run sequentially by default;
    ``parallel=True`` evaluates them concurrently (sessions are
    independent) while keeping records grouped in profile order.
    """
    ordered = sorted(questions, key=lambda q: q.qid)
    report = EvalReport(
        run_id=run_id or uuid.uuid4().hex,
        profile_ids=[p.profile_id for p in profiles],
    )
    if parallel and len(profiles) > 1:
        with ThreadPoolExecutor(max_workers=len(profiles)) as pool:
            futures = [
                pool.submit(_eval_one_profile, profile, ordered, index, embedder,
                            k, max_history_turns, timer)
                for profile in profiles
            ]
            for future in futures:
                report.records.extend(future.result())
    else:
        for profile in profiles:
            report.records.extend(_eval_one_profile(profile, ordered, index, embedder,
                                                    k, max_history_turns, timer))
    return report


def annotate_rating(report: EvalReport, qid: int, profile_id: str, rating: int) -> EvalReport:
    """Store one human star rating on its record; aggregates follow automatically."""
    if not isinstance(rating, int) or not (1 <= rating <= 5):
        raise RatingOutOfRange(f"rating must be an integer in [1, 5], got {rating!r}")
    for record in report.records:
        if record.qid == qid and record.profile_id == profile_id:
            record.rating = rating
            return report
    raise UnknownRecord(f"no record for qid={qid} profile={profile_id!r}")


def load_questions_jsonl(path: str | Path) -> list[EvalQuestion]:
    questions = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            questions.append(EvalQuestion(
                qid=row["qid"],
                prompt=row["prompt"],
                is_followup=row.get("is_followup", False),
                reference_answer=row.get("reference_answer", ""),
                follows=row.get("follows"),
            ))
    return questions


def save_questions_jsonl(questions: Sequence[EvalQuestion], path: str | Path):
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            row = {
                "qid": q.qid,
                "prompt": q.prompt,
                "is_followup": q.is_followup,
                "follows": q.follows,
                "reference_answer": q.reference_answer,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def records_json(report: EvalReport) -> str:
    """Canonical JSON of just the records section (golden-file friendly)."""
    return json.dumps([r.to_dict() for r in report.records],
                      indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def save_report(report: EvalReport, path: str | Path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def load_report(path: str | Path) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    report = EvalReport(run_id=data["run_id"], profile_ids=list(data["profile_ids"]))
    for row in data["records"]:
        report.records.append(EvalRecord(
            qid=row["qid"],
            profile_id=row["profile_id"],
            answer=row["answer"],
            sources=row.get("sources", []),
            containment=row["containment"],
            latency_ms=row["latency_ms"],
            session_id=row.get("session_id", ""),
            rating=row.get("rating"),
            error=row.get("error"),
        ))
    return report
