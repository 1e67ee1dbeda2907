"""Evaluation harness tests: containment proxy, golden-stable runs,
session threading for follow-ups and rating annotation."""

from pathlib import Path

import pytest

from sitegrounder import fixtures
from sitegrounder.conversation import ModelProfile
from sitegrounder.errors import LlmUnavailable, RatingOutOfRange, UnknownRecord
from sitegrounder.evalharness import (
    EvalQuestion,
    annotate_rating,
    containment_score,
    load_questions_jsonl,
    load_report,
    records_json,
    run_eval,
    save_report,
)

GOLDEN = Path(__file__).parent / "golden" / "table1_stub_records.json"


def xxl_profile(kind="stub"):
    return ModelProfile(profile_id="google/flan-t5-xxl", kind=kind, model_id="stub-overlap")


@pytest.fixture()
def table1_questions():
    return load_questions_jsonl(fixtures.questions_path("flan-t5-xxl"))


class TestContainment:
    def test_exact_match_is_one(self):
        assert containment_score("Birla Vishvakarma Mahavidyalaya", "Birla Vishvakarma Mahavidyalaya") == 1.0

    def test_empty_answer_is_zero(self):
        assert containment_score("", "anything") == 0.0

    def test_case_and_extra_tokens_ignored(self):
        score = containment_score("the vishvakarma magazine and newsletter",
                                  "Vishvakarma Magazine and Newsletter")
        assert score == 1.0

    def test_partial_overlap_fraction(self):
        assert containment_score("alpha beta", "alpha gamma") == 0.5

    def test_empty_reference_empty_answer(self):
        assert containment_score("", "") == 1.0

    def test_empty_reference_nonempty_answer(self):
        assert containment_score("something", "") == 0.0

    def test_always_in_unit_interval(self):
        for answer, reference in [("a b c", "c d"), ("x", "x y z"), ("", ""), ("q", "")]:
            assert 0.0 <= containment_score(answer, reference) <= 1.0

    def test_one_when_reference_subset(self):
        assert containment_score("a b c d e", "c e") == 1.0


class TestRunEval:
    def test_table1_fixture_produces_six_records(self, table1_questions, fixture_index, stub_embedder):
        report = run_eval(table1_questions, [xxl_profile()], fixture_index, stub_embedder,
                          timer=lambda: 0.0, run_id="r")
        assert len(report.records) == 6
        assert [r.qid for r in report.records] == [1, 2, 3, 4, 5, 6]
        assert all(r.rating is None for r in report.records)

    def test_empty_question_list(self, fixture_index, stub_embedder):
        report = run_eval([], [xxl_profile()], fixture_index, stub_embedder)
        assert report.records == []

    def test_golden_records_byte_identical(self, table1_questions, fixture_index, stub_embedder):
        runs = [
            records_json(run_eval(table1_questions, [xxl_profile()], fixture_index, stub_embedder,
                                  timer=lambda: 0.0, run_id="golden"))
            for _ in range(2)
        ]
        assert runs[0] == runs[1]
        assert runs[0] == GOLDEN.read_text(encoding="utf-8")

    def test_followup_shares_parent_session(self, table1_questions, fixture_index, stub_embedder):
        report = run_eval(table1_questions, [xxl_profile()], fixture_index, stub_embedder,
                          timer=lambda: 0.0)
        by_qid = {r.qid: r for r in report.records}
        assert by_qid[2].session_id == by_qid[1].session_id
        independents = [by_qid[q].session_id for q in (1, 3, 4, 5, 6)]
        assert len(set(independents)) == 5

    def test_two_profiles_give_twelve_records(self, table1_questions, fixture_index, stub_embedder):
        profiles = [xxl_profile(),
                    ModelProfile(profile_id="google/flan-t5-base", kind="stub", model_id="stub-overlap")]
        report = run_eval(table1_questions, profiles, fixture_index, stub_embedder, timer=lambda: 0.0)
        assert len(report.records) == 12
        assert report.profile_ids == ["google/flan-t5-xxl", "google/flan-t5-base"]

    def test_client_error_recorded_run_continues(self, table1_questions, fixture_index, stub_embedder, monkeypatch):
        from sitegrounder import evalharness

        class FlakyLlm:
            profile_id = "flaky"
            max_context_chars = 6000

            def __init__(self):
                self.n = 0

            def condense(self, history, question):
                return question

            def answer(self, context_text, question):
                self.n += 1
                if self.n == 2:
                    raise LlmUnavailable("backend down")
                return "ok"

        flaky = FlakyLlm()
        monkeypatch.setattr(evalharness, "make_llm_client", lambda profile: flaky)
        report = run_eval(table1_questions, [xxl_profile()], fixture_index, stub_embedder,
                          timer=lambda: 0.0)
        assert len(report.records) == 6
        failed = [r for r in report.records if r.error]
        assert len(failed) == 1
        assert failed[0].answer == ""
        assert failed[0].containment == 0.0

    def test_latency_measured_with_real_timer(self, table1_questions, fixture_index, stub_embedder):
        report = run_eval(table1_questions[:1], [xxl_profile()], fixture_index, stub_embedder)
        assert report.records[0].latency_ms >= 0.0

    def test_parallel_profiles_match_sequential(self, table1_questions, fixture_index, stub_embedder):
        profiles = [xxl_profile(),
                    ModelProfile(profile_id="google/flan-t5-base", kind="stub", model_id="stub-overlap")]
        sequential = run_eval(table1_questions, profiles, fixture_index, stub_embedder,
                              timer=lambda: 0.0, run_id="r")
        concurrent = run_eval(table1_questions, profiles, fixture_index, stub_embedder,
                              timer=lambda: 0.0, run_id="r", parallel=True)
        assert records_json(concurrent) == records_json(sequential)


class TestAnnotate:
    def run_report(self, questions, index, embedder):
        return run_eval(questions, [xxl_profile()], index, embedder, timer=lambda: 0.0)

    def test_rating_stored_and_aggregated(self, table1_questions, fixture_index, stub_embedder):
        report = self.run_report(table1_questions, fixture_index, stub_embedder)
        annotate_rating(report, 6, "google/flan-t5-xxl", 5)
        aggregates = report.aggregates()["google/flan-t5-xxl"]
        assert aggregates["mean_rating"] == 5.0

    def test_published_stars_mean(self, table1_questions, fixture_index, stub_embedder):
        report = self.run_report(table1_questions, fixture_index, stub_embedder)
        stars = fixtures.REFERENCE_STAR_RATINGS["google/flan-t5-xxl"]
        for qid, rating in stars.items():
            annotate_rating(report, qid, "google/flan-t5-xxl", rating)
        mean = report.aggregates()["google/flan-t5-xxl"]["mean_rating"]
        assert mean == pytest.approx(sum(stars.values()) / 6, abs=1e-9)

    def test_rating_zero_out_of_range(self, table1_questions, fixture_index, stub_embedder):
        report = self.run_report(table1_questions, fixture_index, stub_embedder)
        with pytest.raises(RatingOutOfRange):
            annotate_rating(report, 1, "google/flan-t5-xxl", 0)
        with pytest.raises(RatingOutOfRange):
            annotate_rating(report, 1, "google/flan-t5-xxl", 6)

    def test_unknown_record(self, table1_questions, fixture_index, stub_embedder):
        report = self.run_report(table1_questions, fixture_index, stub_embedder)
        with pytest.raises(UnknownRecord):
            annotate_rating(report, 99, "google/flan-t5-xxl", 3)
        with pytest.raises(UnknownRecord):
            annotate_rating(report, 1, "nope", 3)

    def test_mean_over_rated_records_only(self, table1_questions, fixture_index, stub_embedder):
        report = self.run_report(table1_questions, fixture_index, stub_embedder)
        annotate_rating(report, 1, "google/flan-t5-xxl", 2)
        annotate_rating(report, 2, "google/flan-t5-xxl", 4)
        assert report.aggregates()["google/flan-t5-xxl"]["mean_rating"] == 3.0


class TestQuestionFixtures:
    def test_all_three_tables_load(self):
        for key in fixtures.PROFILE_KEYS:
            questions = load_questions_jsonl(fixtures.questions_path(key))
            assert len(questions) == 6
            assert questions[1].is_followup and questions[1].follows == 1

    def test_prompts_identical_across_tables(self):
        prompt_sets = [
            [q.prompt for q in load_questions_jsonl(fixtures.questions_path(key))]
            for key in fixtures.PROFILE_KEYS
        ]
        assert prompt_sets[0] == prompt_sets[1] == prompt_sets[2]

    def test_invalid_followup_rejected(self):
        with pytest.raises(ValueError):
            EvalQuestion(qid=1, prompt="p", is_followup=True, follows=None)
        with pytest.raises(ValueError):
            EvalQuestion(qid=1, prompt="p", is_followup=True, follows=2)


class TestReportIo:
    def test_round_trip(self, table1_questions, fixture_index, stub_embedder, tmp_path):
        report = run_eval(table1_questions, [xxl_profile()], fixture_index, stub_embedder,
                          timer=lambda: 0.0, run_id="io")
        annotate_rating(report, 1, "google/flan-t5-xxl", 4)
        path = tmp_path / "report.json"
        save_report(report, path)
        loaded = load_report(path)
        assert loaded.run_id == "io"
        assert records_json(loaded) == records_json(report)
        assert loaded.aggregates() == report.aggregates()
