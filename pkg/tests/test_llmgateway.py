"""Gateway behavior: completion transport, expansion parsing, judging,
summaries, synthetic-query generation, and the pinned prompt assets."""

import pytest

from briefbank.errors import EmptyOutputError, TransportError, ValidationError
from briefbank.llmgateway import (
    EXPANSION_SYSTEM_PROMPT,
    GENERATION_SYSTEM_TEMPLATE,
    EndpointConfig,
    LLMGateway,
    MockGateway,
    PromptRequest,
    complete,
    expand_query,
    generate_synthetic_query,
    judge_relevance,
    parse_expansion_reply,
    render_fewshot_examples,
    summarize_result,
)

# The deployed expansion prompt, pinned byte-for-byte. Any edit to the asset
# is a contract change and must update this constant deliberately.
EXPANSION_PROMPT_PINNED = '''You are a legal retrieval query expander.

Given a legal search query, you should:

1. Infer the key legal issue(s) raised by the query.

2. State the applicable legal rule(s) in general doctrinal terms.

3. Optionally provide a brief legal analysis (reasoning) if it helps clarify the issue and rule.

4. Construct an augmented search query that incorporates the original query plus useful legal reasoning signals (issues, rules, key concepts, doctrinal terms). This augmented query may be in any style (keywords, IRAC-style summary, or a well-structured legal question), as long as it is helpful for retrieving relevant cases and statutes.

Important constraints:

- Do NOT invent or guess specific statute numbers, code sections, or guideline provisions unless they already appear in the original query.

- Do NOT introduce new facts, parties, or jurisdictions that are not clearly implied by the query.

- You MAY generalize to doctrinal labels and concepts (e.g., "merger of offenses", "double jeopardy", "premises liability").

- The augmented query MUST include the original query content in some form (verbatim or lightly edited) plus additional legally-relevant language.

- Be concise but not minimal: prefer adding a few high-value issues/rules/terms over verbose filler.

Output format:

issue: "concise statement of the main legal issue"

rule: "concise statement of the applicable legal rule or doctrine",

analysis: "optional brief reasoning, 1–3 sentences, may be empty if not helpful",

augmented query: "the final expanded query string used for retrieval"

Remember:

- The `augmented query` can be in natural language or semi-structured (e.g. IRAC-style, dense prose, or keyword-enriched), but it must be optimized to help a legal search engine retrieve the most relevant authorities.

- Do NOT mention statutes or guideline provisions by number if they are not already present in the original query.
'''

GENERATION_TEMPLATE_PINNED = '''You are a helpful legal assistant. You are given a paragraph from a legal brief. Your task is to come up with a question / query for which the paragraph would be the top search result. Make sure that the query is not too specific.

Some examples are shown below.

{examples}

In case the snippet is not detailed enough or doesn't contain neither facts nor legal reasoning, just reply with None, else return the generated query, nothing else.
'''

# The worked expansion example: this reply shape is what the expander model
# returns for the DYFS-threat consent query.
DYFS_QUERY = "consent under circumstances where police threaten to call DYFS"
DYFS_REPLY = '''issue: "Validity of consent to search or interrogation when obtained under threat of involving child protective services"

rule: "Consent must be voluntary, knowing, and intelligently given, free from coercion or duress, as established by doctrines such as Schneckloth v. Bustamonte and its progeny"

analysis: "The threat to call DYFS (Division of Youth and Family Services) may be considered a form of coercion that undermines the voluntariness of consent, particularly if the individual is a parent or guardian. Courts consider the totality of the circumstances, including the language used by the police, the presence of any promises or threats, and the individual's capacity to understand the consequences of their actions."

augmented query: "consent to search or interrogation under threat of DYFS involvement AND (Schneckloth v. Bustamonte OR voluntary consent OR coercion OR duress) AND (police tactics OR fourth amendment OR parental rights)"
'''


class TestPromptAssets:
    def test_expansion_prompt_pinned_bytes(self):
        assert EXPANSION_SYSTEM_PROMPT == EXPANSION_PROMPT_PINNED

    def test_generation_template_pinned_bytes(self):
        assert GENERATION_SYSTEM_TEMPLATE == GENERATION_TEMPLATE_PINNED

    def test_generation_template_decline_clause(self):
        assert "just reply with None" in GENERATION_SYSTEM_TEMPLATE


class TestComplete:
    def test_canned_reply(self):
        def post(url, payload, timeout, headers):
            return {"text": "canned"}

        endpoint = EndpointConfig(url="http://llm.invalid/complete", post=post)
        request = PromptRequest(system_prompt="s", user_prompt="u")
        assert complete(endpoint, request) == "canned"

    def test_unreachable_with_two_retries_makes_three_attempts(self):
        attempts = []

        def post(url, payload, timeout, headers):
            attempts.append(1)
            raise TransportError("refused")

        endpoint = EndpointConfig(url="http://llm.invalid/complete",
                                  max_retries=2, backoff_base=0.0, post=post)
        with pytest.raises(TransportError, match="after 3 attempts"):
            complete(endpoint, PromptRequest(system_prompt="s", user_prompt="u"))
        assert len(attempts) == 3

    def test_oversized_reply_truncated(self):
        def post(url, payload, timeout, headers):
            return {"text": "x" * 5000}

        endpoint = EndpointConfig(url="http://llm.invalid/complete", post=post)
        request = PromptRequest(system_prompt="s", user_prompt="u", max_output_chars=100)
        assert len(complete(endpoint, request)) == 100

    def test_empty_reply_is_an_error(self):
        def post(url, payload, timeout, headers):
            return {"text": "   "}

        endpoint = EndpointConfig(url="http://llm.invalid/complete", post=post)
        with pytest.raises(EmptyOutputError):
            complete(endpoint, PromptRequest(system_prompt="s", user_prompt="u"))

    def test_wire_format_and_auth_header(self):
        seen = {}

        def post(url, payload, timeout, headers):
            seen.update(payload=payload, headers=headers)
            return {"text": "ok"}

        endpoint = EndpointConfig(url="http://llm.invalid/complete",
                                  api_key="sekrit", post=post)
        complete(endpoint, PromptRequest(system_prompt="SYS", user_prompt="USR",
                                         max_output_chars=50))
        assert seen["payload"] == {"system": "SYS", "user": "USR", "max_chars": 50}
        assert seen["headers"]["Authorization"] == "Bearer sekrit"

    def test_prompt_request_validation(self):
        with pytest.raises(ValidationError):
            PromptRequest(system_prompt="", user_prompt="u")
        with pytest.raises(ValidationError):
            PromptRequest(system_prompt="s", user_prompt="u", max_output_chars=0)


class TestGatewayRouting:
    def test_mock_canned_table(self):
        gateway = MockGateway(replies={"the prompt": "the reply"})
        request = PromptRequest(system_prompt="s", user_prompt="the prompt")
        assert gateway.complete_role("judge", request) == "the reply"

    def test_unconfigured_role_is_transport_error(self):
        gateway = LLMGateway({})
        with pytest.raises(TransportError, match="expander"):
            gateway.complete_role("expander",
                                  PromptRequest(system_prompt="s", user_prompt="u"))

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("BRIEFBANK_EXPAND_URL", "http://e.invalid")
        monkeypatch.setenv("BRIEFBANK_EXPAND_API_KEY", "k1")
        monkeypatch.setenv("BRIEFBANK_JUDGE_URL", "http://j.invalid")
        monkeypatch.delenv("BRIEFBANK_SUMMARY_URL", raising=False)
        monkeypatch.delenv("BRIEFBANK_GEN_URL", raising=False)
        gateway = LLMGateway.from_env()
        assert gateway.endpoints["expander"].url == "http://e.invalid"
        assert gateway.endpoints["expander"].api_key == "k1"
        assert gateway.endpoints["judge"].api_key is None
        assert "summarizer" not in gateway.endpoints


class TestExpandQuery:
    def test_worked_dyfs_example(self):
        gateway = MockGateway(replies={DYFS_QUERY: DYFS_REPLY})
        expanded = expand_query(gateway, DYFS_QUERY)
        assert not expanded.degraded
        assert "consent to search or interrogation under threat of DYFS involvement" in expanded.augmented
        assert expanded.issue.startswith("Validity of consent")
        assert "Schneckloth" in expanded.rule
        assert expanded.analysis  # populated for this example

    def test_sends_pinned_system_prompt_verbatim(self):
        gateway = MockGateway(replies={DYFS_QUERY: DYFS_REPLY})
        expand_query(gateway, DYFS_QUERY)
        role, request = gateway.calls[0]
        assert role == "expander"
        assert request.system_prompt == EXPANSION_PROMPT_PINNED
        assert request.user_prompt == DYFS_QUERY

    def test_unlabeled_prose_degrades_to_original(self):
        gateway = MockGateway(default_reply="here are some vague musings about law")
        expanded = expand_query(gateway, "booking exception to miranda")
        assert expanded.degraded
        assert expanded.augmented == "booking exception to miranda"

    def test_all_four_fields_populated(self):
        reply = ('issue: "i"\nrule: "r"\nanalysis: "a"\n'
                 'augmented query: "booking exception to miranda custodial questioning"')
        gateway = MockGateway(default_reply=reply)
        expanded = expand_query(gateway, "booking exception to miranda")
        assert (expanded.issue, expanded.rule, expanded.analysis) == ("i", "r", "a")
        assert not expanded.degraded

    def test_gateway_down_degrades(self):
        expanded = expand_query(MockGateway(fail_all=True), "some query")
        assert expanded.degraded
        assert expanded.augmented == "some query"

    def test_empty_query_is_precondition_error(self):
        with pytest.raises(ValidationError):
            expand_query(MockGateway(), "   ")

    def test_low_overlap_sets_warning_not_failure(self):
        reply = 'augmented query: "entirely different terms"'
        expanded = expand_query(MockGateway(default_reply=reply),
                                "original consent search query")
        assert expanded.overlap_warning
        assert not expanded.degraded

    def test_parse_tolerates_ordering_and_quotes(self):
        fields = parse_expansion_reply(
            "augmented query: unquoted text here\nrule: 'single quoted',\nissue: \"q\""
        )
        assert fields["augmented query"] == "unquoted text here"
        assert fields["rule"] == "single quoted"
        assert fields["issue"] == "q"


class TestSummarize:
    def test_gateway_down_leading_text_fallback(self):
        summary = summarize_result(MockGateway(fail_all=True), "word " * 300,
                                   max_chars=50)
        assert summary.degraded
        assert len(summary.text) == 50
        assert summary.text == ("word " * 300)[:50]

    def test_echo_mock(self):
        gateway = MockGateway(role_handlers={"summarizer": "the summary"})
        summary = summarize_result(gateway, "a paragraph of text")
        assert summary.text == "the summary"
        assert not summary.degraded

    def test_cap_applies_to_model_reply(self):
        gateway = MockGateway(role_handlers={"summarizer": "s" * 1000})
        paragraph = " ".join(["word"] * 500)
        summary = summarize_result(gateway, paragraph, max_chars=400)
        assert len(summary.text) <= 400

    def test_meta_included_in_prompt(self):
        gateway = MockGateway(role_handlers={"summarizer": "ok"})
        summarize_result(gateway, "text", doc_meta={"title": "State v. X",
                                                    "filing_date": "2024-01-02"})
        _, request = gateway.calls[0]
        assert "State v. X" in request.user_prompt
        assert "2024-01-02" in request.user_prompt


class TestJudge:
    @pytest.mark.parametrize("reply,label", [
        ("RELEVANT", "relevant"),
        ("IRRELEVANT", "irrelevant"),
        ("maybe?", "uncertain"),
        ("Yes, clearly.", "relevant"),
        ("not relevant to this query", "irrelevant"),
        ("relevant.", "relevant"),
    ])
    def test_parsing(self, reply, label):
        verdict = judge_relevance(MockGateway(default_reply=reply), "q", "p")
        assert verdict.label == label
        assert verdict.raw_response == reply

    def test_transport_failure_is_uncertain_with_record(self):
        verdict = judge_relevance(MockGateway(fail_all=True), "q", "p")
        assert verdict.label == "uncertain"
        assert verdict.transport_error
        assert "transport error" in verdict.raw_response

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValidationError):
            judge_relevance(MockGateway(), "", "p")


class TestGenerate:
    def test_none_reply_is_declined(self):
        result = generate_synthetic_query(MockGateway(default_reply="None"), "para")
        assert result.text is None and result.declined and result.error is None

    def test_none_case_insensitive_trimmed(self):
        result = generate_synthetic_query(MockGateway(default_reply="  nOnE \n"), "para")
        assert result.declined

    def test_query_returned_verbatim(self):
        reply = "what is the standard for consent searches?"
        result = generate_synthetic_query(MockGateway(default_reply=reply), "para")
        assert result.text == reply
        assert not result.declined and result.error is None

    def test_gateway_down_is_error_not_declined(self):
        result = generate_synthetic_query(MockGateway(fail_all=True), "para")
        assert result.text is None
        assert not result.declined
        assert result.error

    def test_fewshot_examples_rendered_into_system_prompt(self):
        gateway = MockGateway(default_reply="None")
        generate_synthetic_query(gateway, "the paragraph",
                                 [("q one", "para one"), ("q two", "para two")])
        _, request = gateway.calls[0]
        assert "paragraph: para one\nquery: q one" in request.system_prompt
        assert request.system_prompt.startswith("You are a helpful legal assistant.")

    def test_render_fewshot_empty(self):
        assert render_fewshot_examples([]) == "(no examples)"


class TestTotalityUnderMocks:
    def test_all_operations_total_with_failing_gateway(self):
        dead = MockGateway(fail_all=True)
        assert expand_query(dead, "q").degraded
        assert summarize_result(dead, "p").degraded
        assert judge_relevance(dead, "q", "p").label == "uncertain"
        assert generate_synthetic_query(dead, "p").error
